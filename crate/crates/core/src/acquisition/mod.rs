//! Candidate pools and acquisition maximization.
//!
//! The argmax over the design space is taken over a finite pool: a fresh
//! scrambled Sobol set every iteration for box domains, or the
//! not-yet-evaluated rows of a fingerprint dataset.

pub mod sobol;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;

use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::testbed::FingerprintSet;

pub use sobol::{Sobol, MAX_SOBOL_DIM};

/// Largest pool over which joint posterior samples are drawn.
pub const MAX_POOL: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolOrigin {
    Sobol,
    Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    /// One candidate per row, in the problem's own coordinates.
    pub points: DMatrix<f64>,
    pub origin: PoolOrigin,
    /// Dataset row of each candidate (dataset pools only).
    pub rows: Vec<usize>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }
}

/// Where candidates come from.
#[derive(Debug, Clone, Copy)]
pub enum PoolSource<'a> {
    Sobol,
    /// Rows of `set` listed in `remaining` are still unevaluated.
    Dataset {
        set: &'a FingerprintSet,
        remaining: &'a [usize],
    },
}

/// `n` Sobol points mapped to `[lb, ub]^d`. Scrambled when an rng is given;
/// otherwise the origin is skipped so the first point is the box center.
pub fn sobol_pool<R: Rng + ?Sized>(n: usize, d: usize, lb: f64, ub: f64, rng: Option<&mut R>) -> Result<CandidatePool> {
    let mut seq = match rng {
        Some(rng) => Sobol::scrambled(d, rng)?,
        None => {
            let mut s = Sobol::new(d)?;
            s.skip(1);
            s
        }
    };
    let mut points = DMatrix::zeros(n, d);
    for i in 0..n {
        for (j, u) in seq.next_point().into_iter().enumerate() {
            points[(i, j)] = lb + (ub - lb) * u;
        }
    }
    Ok(CandidatePool {
        points,
        origin: PoolOrigin::Sobol,
        rows: Vec::new(),
    })
}

pub fn make_pool<R: Rng + ?Sized>(config: &CampaignConfig, source: PoolSource<'_>, rng: &mut R) -> Result<CandidatePool> {
    if config.pool_size < 2 {
        return Err(Error::config("pool_size", "must be at least 2"));
    }
    match source {
        PoolSource::Sobol => sobol_pool(config.pool_size, config.dimension, config.lb, config.ub, Some(rng)),
        PoolSource::Dataset { set, remaining } => {
            if remaining.is_empty() {
                return Err(Error::Data("every dataset row has been evaluated".into()));
            }
            let rows: Vec<usize> = if remaining.len() > MAX_POOL {
                let mut picked: Vec<usize> = index::sample(rng, remaining.len(), MAX_POOL)
                    .into_iter()
                    .map(|k| remaining[k])
                    .collect();
                picked.sort_unstable();
                picked
            } else {
                remaining.to_vec()
            };
            let mut points = DMatrix::zeros(rows.len(), set.bits());
            for (i, &r) in rows.iter().enumerate() {
                for (j, &b) in set.vectors[r].iter().enumerate() {
                    points[(i, j)] = f64::from(b);
                }
            }
            Ok(CandidatePool {
                points,
                origin: PoolOrigin::Dataset,
                rows,
            })
        }
    }
}

/// `γ_t = γ₀ · decay^t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSchedule {
    pub gamma0: f64,
    pub decay: f64,
}

impl GammaSchedule {
    pub fn new(gamma0: f64, decay: f64) -> Result<Self> {
        if !(gamma0 >= 0.0 && gamma0.is_finite()) {
            return Err(Error::config("gamma0", "must be a finite non-negative number"));
        }
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::config("gamma_decay", "must lie in (0, 1]"));
        }
        Ok(Self { gamma0, decay })
    }

    pub fn gamma(&self, t: usize) -> f64 {
        self.gamma0 * self.decay.powi(t.min(i32::MAX as usize) as i32)
    }
}

/// First index of the largest entry; NaNs never win.
pub fn argmax(v: &DVector<f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in v.iter().enumerate() {
        if x.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if x <= b => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}

/// Plain Thompson sampling: the pool point maximizing the sample.
pub fn acquire_ts(f_hat: &DVector<f64>, pool: &CandidatePool) -> Result<(usize, Vec<f64>)> {
    if f_hat.len() != pool.len() {
        return Err(Error::Dimension(format!("{} sample values for a pool of {}", f_hat.len(), pool.len())));
    }
    let i = argmax(f_hat).ok_or_else(|| Error::Data("no finite acquisition value".into()))?;
    Ok((i, pool.point(i)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub index: usize,
    pub x_next: Vec<f64>,
    pub scores: DVector<f64>,
}

/// `(v − mean) / std` over the pool; a constant vector maps to zeros.
pub fn zscore(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    if std > 0.0 {
        v.map(|x| (x - mean) / std)
    } else {
        DVector::zeros(v.len())
    }
}

/// Preference-aware Thompson sampling: maximize `f̂ + γ_t r̂`. A missing
/// `r̂` (no preference model yet) or `γ_t = 0` reduces to [`acquire_ts`].
pub fn acquire_expats(
    f_hat: &DVector<f64>,
    r_hat: Option<&DVector<f64>>,
    gamma_t: f64,
    pool: &CandidatePool,
    zscore_combine: bool,
) -> Result<Acquisition> {
    let scores = match r_hat {
        Some(r) if gamma_t != 0.0 => {
            if r.len() != f_hat.len() {
                return Err(Error::Dimension(format!(
                    "preference sample of {} for a pool of {}",
                    r.len(),
                    f_hat.len()
                )));
            }
            if zscore_combine {
                zscore(f_hat) + zscore(r) * gamma_t
            } else {
                f_hat + r * gamma_t
            }
        }
        _ => f_hat.clone(),
    };
    let (index, x_next) = acquire_ts(&scores, pool)?;
    Ok(Acquisition { index, x_next, scores })
}
