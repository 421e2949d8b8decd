//! Covariance functions: ARD Matérn-5/2 for continuous inputs and the
//! Tanimoto (Jaccard) kernel for binary fingerprints.

use nalgebra::{DMatrix, DVector};

use crate::config::KernelKind;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Log-scale hyperparameters. Tanimoto kernels carry no lengthscales.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams<T: Scalar> {
    pub log_lengthscales: DVector<T>,
    pub log_signal_variance: T,
    pub log_noise_variance: T,
}

pub const NOISE_FLOOR: f64 = 1e-6;

impl<T: Scalar> KernelParams<T> {
    /// Lengthscales `√d / 2`, signal variance 1, noise variance 10⁻².
    pub fn initial(kind: KernelKind, d: usize) -> Self {
        let log_lengthscales = match kind {
            KernelKind::Matern52 => DVector::from_element(d, T::lit(((d as f64).sqrt() / 2.0).ln())),
            KernelKind::Tanimoto => DVector::zeros(0),
        };
        Self {
            log_lengthscales,
            log_signal_variance: T::zero(),
            log_noise_variance: T::lit(1e-2f64.ln()),
        }
    }

    /// Unit lengthscales and signal variance, zero-ish noise.
    pub fn unit(d: usize) -> Self {
        Self {
            log_lengthscales: DVector::zeros(d),
            log_signal_variance: T::zero(),
            log_noise_variance: T::lit(NOISE_FLOOR.ln()),
        }
    }

    pub fn signal_variance(&self) -> T {
        self.log_signal_variance.exp()
    }

    /// Noise variance, clamped at the floor.
    pub fn noise_variance(&self) -> T {
        let floor = T::lit(NOISE_FLOOR);
        let v = self.log_noise_variance.exp();
        if v < floor {
            floor
        } else {
            v
        }
    }

    pub(crate) fn pack(&self) -> DVector<T> {
        let d = self.log_lengthscales.len();
        let mut v = DVector::zeros(d + 2);
        v.rows_mut(0, d).copy_from(&self.log_lengthscales);
        v[d] = self.log_signal_variance;
        v[d + 1] = self.log_noise_variance;
        v
    }

    pub(crate) fn unpack(v: &DVector<T>) -> Self {
        let d = v.len() - 2;
        Self {
            log_lengthscales: v.rows(0, d).into_owned(),
            log_signal_variance: v[d],
            log_noise_variance: v[d + 1],
        }
    }

    /// Keeps the iterate inside a box that stops Adam from wandering into
    /// degenerate kernels.
    pub(crate) fn clamp(&mut self) {
        let clip = |v: T, lo: f64, hi: f64| -> T {
            let (lo, hi) = (T::lit(lo.ln()), T::lit(hi.ln()));
            if v < lo {
                lo
            } else if v > hi {
                hi
            } else {
                v
            }
        };
        for l in self.log_lengthscales.iter_mut() {
            *l = clip(*l, 1e-2, 1e2);
        }
        self.log_signal_variance = clip(self.log_signal_variance, 1e-3, 1e3);
        self.log_noise_variance = clip(self.log_noise_variance, NOISE_FLOOR, 10.0);
    }
}

const SQRT5: f64 = 2.236_067_977_499_79;

/// `σ²(1 + √5 r + 5r²/3) exp(−√5 r)` with `r` the lengthscale-scaled distance.
pub fn matern52<T: Scalar>(x: &[T], y: &[T], params: &KernelParams<T>) -> T {
    let r2 = x
        .iter()
        .zip(y)
        .zip(params.log_lengthscales.iter())
        .fold(T::zero(), |acc, ((a, b), ll)| {
            let d = (*a - *b) / ll.exp();
            acc + d * d
        });
    params.signal_variance() * matern52_unit(r2.sqrt())
}

#[inline]
pub(crate) fn matern52_unit<T: Scalar>(r: T) -> T {
    let s5r = T::lit(SQRT5) * r;
    (T::one() + s5r + s5r * s5r / T::lit(3.0)) * (-s5r).exp()
}

/// `⟨u,v⟩ / (‖u‖² + ‖v‖² − ⟨u,v⟩)`, 0 when both vectors are all-zero.
pub fn tanimoto<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!(
            "tanimoto on vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(tanimoto_unchecked(u, v))
}

#[inline]
fn tanimoto_unchecked<T: Scalar>(u: &[T], v: &[T]) -> T {
    let (mut uv, mut uu, mut vv) = (T::zero(), T::zero(), T::zero());
    for (a, b) in u.iter().zip(v) {
        uv += *a * *b;
        uu += *a * *a;
        vv += *b * *b;
    }
    let denom = uu + vv - uv;
    if denom > T::zero() {
        uv / denom
    } else {
        T::zero()
    }
}

/// A kernel with fixed hyperparameters, evaluated on row-major point sets.
#[derive(Debug, Clone)]
pub struct Kernel<T: Scalar> {
    pub kind: KernelKind,
    pub params: KernelParams<T>,
}

pub(crate) fn rows_of<T: Scalar>(x: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect()
}

impl<T: Scalar> Kernel<T> {
    pub fn new(kind: KernelKind, params: KernelParams<T>) -> Self {
        Self { kind, params }
    }

    fn prepare(&self, pts: &[Vec<T>]) -> Vec<Vec<T>> {
        match self.kind {
            KernelKind::Matern52 => {
                let inv: Vec<T> = self.params.log_lengthscales.iter().map(|l| (-*l).exp()).collect();
                pts.iter()
                    .map(|p| p.iter().zip(&inv).map(|(a, s)| *a * *s).collect())
                    .collect()
            }
            KernelKind::Tanimoto => pts.to_vec(),
        }
    }

    #[inline]
    fn eval_prepared(&self, a: &[T], b: &[T]) -> T {
        match self.kind {
            KernelKind::Matern52 => {
                let r2 = a.iter().zip(b).fold(T::zero(), |acc, (x, y)| {
                    let d = *x - *y;
                    acc + d * d
                });
                matern52_unit(r2.sqrt())
            }
            KernelKind::Tanimoto => tanimoto_unchecked(a, b),
        }
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        let p = self.prepare(&[x.to_vec(), y.to_vec()]);
        self.params.signal_variance() * self.eval_prepared(&p[0], &p[1])
    }

    /// `k(A, A)` without noise.
    pub fn gram(&self, a: &[Vec<T>]) -> DMatrix<T> {
        let pa = self.prepare(a);
        let s = self.params.signal_variance();
        let n = pa.len();
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n {
            k[(j, j)] = s * self.eval_prepared(&pa[j], &pa[j]);
            for i in (j + 1)..n {
                let v = s * self.eval_prepared(&pa[i], &pa[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// `k(A, B)`, shape `|A| × |B|`.
    pub fn cross(&self, a: &[Vec<T>], b: &[Vec<T>]) -> DMatrix<T> {
        let pa = self.prepare(a);
        let pb = self.prepare(b);
        let s = self.params.signal_variance();
        DMatrix::from_fn(pa.len(), pb.len(), |i, j| s * self.eval_prepared(&pa[i], &pb[j]))
    }

    /// Gradient of `½ Σ_ij W_ij K_ij` w.r.t. the log-lengthscales, for a
    /// symmetric weight matrix `W`.
    pub(crate) fn lengthscale_gradient(&self, pts: &[Vec<T>], w: &DMatrix<T>) -> DVector<T> {
        let d = self.params.log_lengthscales.len();
        let mut g = DVector::zeros(d);
        if self.kind != KernelKind::Matern52 {
            return g;
        }
        let pa = self.prepare(pts);
        let s = self.params.signal_variance();
        let c = T::lit(5.0 / 3.0);
        let sqrt5 = T::lit(SQRT5);
        for j in 0..pa.len() {
            for i in (j + 1)..pa.len() {
                let r2 = pa[i].iter().zip(&pa[j]).fold(T::zero(), |acc, (x, y)| {
                    let d = *x - *y;
                    acc + d * d
                });
                let r = r2.sqrt();
                // ∂k/∂log ℓ_k = σ² (5/3)(1 + √5 r) e^{−√5 r} Δ_k²/ℓ_k²;
                // the pair (i, j) appears twice in the sum, which cancels the ½
                let q = w[(i, j)] * s * c * (T::one() + sqrt5 * r) * (-sqrt5 * r).exp();
                for k in 0..d {
                    let dk = pa[i][k] - pa[j][k];
                    g[k] += q * dk * dk;
                }
            }
        }
        g
    }
}
