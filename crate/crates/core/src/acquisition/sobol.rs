//! Sobol low-discrepancy sequences (Joe–Kuo direction numbers) with
//! optional linear-matrix scrambling and a random digital shift.

use rand::Rng;

use crate::error::{Error, Result};

const BITS: usize = 32;

/// `(degree s, coefficients a, initial m_1..m_s)` for dimensions 2 onward.
#[rustfmt::skip]
const DIRECTIONS: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 3, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 3, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 3, 1, 5, 27, 61, 31]),
    (7, 21, &[1, 1, 5, 11, 19, 41, 61]),
    (7, 28, &[1, 3, 5, 3, 3, 13, 69]),
    (7, 31, &[1, 1, 7, 13, 1, 19, 1]),
    (7, 32, &[1, 3, 7, 5, 13, 19, 59]),
    (7, 37, &[1, 1, 3, 9, 25, 29, 41]),
    (7, 41, &[1, 3, 5, 13, 23, 1, 55]),
    (7, 42, &[1, 3, 7, 3, 13, 59, 17]),
    (7, 50, &[1, 3, 1, 3, 5, 53, 69]),
    (7, 55, &[1, 1, 5, 5, 23, 33, 13]),
    (7, 56, &[1, 1, 7, 7, 1, 61, 123]),
    (7, 59, &[1, 1, 7, 9, 13, 61, 49]),
    (7, 62, &[1, 3, 3, 5, 3, 55, 33]),
    (8, 14, &[1, 3, 1, 15, 31, 13, 49, 245]),
    (8, 21, &[1, 3, 5, 15, 31, 59, 63, 97]),
    (8, 22, &[1, 3, 1, 11, 11, 11, 77, 249]),
];

pub const MAX_SOBOL_DIM: usize = DIRECTIONS.len() + 1;

fn direction_numbers(dim: usize) -> Vec<[u32; BITS]> {
    let mut out = Vec::with_capacity(dim);
    let mut first = [0u32; BITS];
    for (k, v) in first.iter_mut().enumerate() {
        *v = 1 << (BITS - 1 - k);
    }
    out.push(first);
    for &(s, a, m) in DIRECTIONS.iter().take(dim.saturating_sub(1)) {
        let s = s as usize;
        let mut v = [0u32; BITS];
        for k in 0..BITS {
            v[k] = if k < s {
                m[k] << (BITS - 1 - k)
            } else {
                let mut x = v[k - s] ^ (v[k - s] >> s);
                for i in 1..s {
                    if (a >> (s - 1 - i)) & 1 == 1 {
                        x ^= v[k - i];
                    }
                }
                x
            };
        }
        out.push(v);
    }
    out
}

/// Gray-code ordered Sobol generator over `[0, 1)^d`.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    current: Vec<u32>,
    index: u64,
}

impl Sobol {
    /// Unscrambled sequence; the first point is the origin.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_SOBOL_DIM {
            return Err(Error::Dimension(format!(
                "Sobol sequences support 1..={MAX_SOBOL_DIM} dimensions, got {dim}"
            )));
        }
        Ok(Self {
            directions: direction_numbers(dim),
            current: vec![0; dim],
            index: 0,
        })
    }

    /// Random lower-triangular binary scramble of every coordinate's
    /// direction numbers followed by a random digital shift.
    pub fn scrambled<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        let mut s = Self::new(dim)?;
        for dirs in s.directions.iter_mut() {
            // row r of the scramble matrix, as a mask over the input bits
            let mut rows = [0u32; BITS];
            for (r, row) in rows.iter_mut().enumerate() {
                let mut mask = 1u32 << (BITS - 1 - r);
                for c in 0..r {
                    if rng.random_bool(0.5) {
                        mask |= 1 << (BITS - 1 - c);
                    }
                }
                *row = mask;
            }
            for v in dirs.iter_mut() {
                let mut y = 0u32;
                for (r, row) in rows.iter().enumerate() {
                    if (*v & row).count_ones() % 2 == 1 {
                        y |= 1 << (BITS - 1 - r);
                    }
                }
                *v = y;
            }
        }
        for c in s.current.iter_mut() {
            *c = rng.random();
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.current.len()
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let scale = 1.0 / (1u64 << BITS) as f64;
        let out = self.current.iter().map(|&c| c as f64 * scale).collect();
        let bit = (self.index.trailing_ones() as usize).min(BITS - 1);
        for (c, dirs) in self.current.iter_mut().zip(&self.directions) {
            *c ^= dirs[bit];
        }
        self.index += 1;
        out
    }

    /// Skips `n` points.
    pub fn skip(&mut self, n: usize) {
        for _ in 0..n {
            self.next_point();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // rows 1, 2, 5, 13 and 31 of scipy.stats.qmc.Sobol(d=12, scramble=False)
    const REFERENCE: [(usize, [f64; 12]); 5] = [
        (1, [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]),
        (2, [0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75, 0.75, 0.75, 0.75]),
        (5, [0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875, 0.375, 0.375, 0.125, 0.375, 0.875]),
        (13, [0.8125, 0.6875, 0.8125, 0.0625, 0.4375, 0.9375, 0.5625, 0.5625, 0.5625, 0.4375, 0.8125, 0.9375]),
        (31, [0.03125, 0.53125, 0.90625, 0.96875, 0.96875, 0.78125, 0.34375, 0.53125, 0.15625, 0.59375, 0.03125, 0.34375]),
    ];

    #[test]
    fn matches_reference_sequence() {
        let mut s = Sobol::new(12).unwrap();
        let pts: Vec<Vec<f64>> = (0..32).map(|_| s.next_point()).collect();
        assert!(pts[0].iter().all(|&v| v == 0.0));
        for (i, row) in REFERENCE.iter() {
            assert_eq!(pts[*i], row.to_vec(), "row {i}");
        }
    }

    #[test]
    fn unscrambled_points_are_distinct_dyadics() {
        let mut s = Sobol::new(MAX_SOBOL_DIM).unwrap();
        let pts: Vec<Vec<f64>> = (0..256).map(|_| s.next_point()).collect();
        for d in 0..MAX_SOBOL_DIM {
            // every dimension is a (0,m,1)-net: 256 points hit 256 distinct cells
            let mut cells: Vec<u32> = pts.iter().map(|p| (p[d] * 256.0) as u32).collect();
            cells.sort_unstable();
            cells.dedup();
            assert_eq!(cells.len(), 256, "dimension {d}");
        }
    }

    #[test]
    fn scrambling_keeps_stratification() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = Sobol::scrambled(5, &mut rng).unwrap();
        let pts: Vec<Vec<f64>> = (0..64).map(|_| s.next_point()).collect();
        for d in 0..5 {
            let mut cells: Vec<u32> = pts.iter().map(|p| (p[d] * 64.0) as u32).collect();
            cells.sort_unstable();
            cells.dedup();
            assert_eq!(cells.len(), 64);
        }
        assert!(pts.iter().flatten().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn rejects_unsupported_dimension() {
        assert!(Sobol::new(0).is_err());
        assert!(Sobol::new(MAX_SOBOL_DIM + 1).is_err());
    }
}
