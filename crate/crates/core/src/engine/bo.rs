//! One BO iteration: fit, sample, combine with the preference sample,
//! evaluate.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;

use super::surrogate::Surrogate;
use crate::acquisition::{acquire_expats, make_pool, CandidatePool, GammaSchedule, PoolSource};
use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::linalg::Jitter;
use crate::preference::{pref_thompson_sample, PosteriorSnapshot};
use crate::rng::{stream, CampaignRng, Stream};
use crate::testbed::Problem;
use crate::types::{Observation, ObservationSet};

/// Maps design points to the inputs the models see: `[-1, 1]^d` for box
/// problems, the raw bits for fingerprints.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    lb: f64,
    ub: f64,
    identity: bool,
}

impl FeatureMap {
    pub fn new(config: &CampaignConfig, problem: &Problem) -> Self {
        Self {
            lb: config.lb,
            ub: config.ub,
            identity: problem.fingerprints().is_some(),
        }
    }

    fn scale(&self, v: f64) -> f64 {
        (2.0 * v - self.lb - self.ub) / (self.ub - self.lb)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if self.identity {
            x.to_vec()
        } else {
            x.iter().map(|&v| self.scale(v)).collect()
        }
    }

    pub fn apply_matrix(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        if self.identity {
            points.clone()
        } else {
            points.map(|v| self.scale(v))
        }
    }

    pub fn matrix<'a>(&self, rows: impl ExactSizeIterator<Item = &'a [f64]>, d: usize) -> DMatrix<f64> {
        let n = rows.len();
        let mut m = DMatrix::zeros(n, d);
        for (i, x) in rows.enumerate() {
            for (j, v) in self.apply(x).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }
}

pub struct IterationOutcome {
    pub observation: Observation,
    pub pref_version: Option<u64>,
}

pub struct BoLoop {
    pub config: CampaignConfig,
    pub problem: Arc<Problem>,
    pub features: FeatureMap,
    schedule: GammaSchedule,
    surrogate: Surrogate,
    rng: CampaignRng,
    pref_rng: CampaignRng,
    init_rng: CampaignRng,
    observations: Vec<Observation>,
    remaining: Vec<usize>,
}

impl BoLoop {
    pub fn new(config: CampaignConfig, problem: Arc<Problem>) -> Result<Self> {
        let seed = config.seed;
        let remaining = problem.fingerprints().map(|s| (0..s.len()).collect()).unwrap_or_default();
        Ok(Self {
            schedule: GammaSchedule::new(config.gamma0, config.gamma_decay)?,
            surrogate: Surrogate::for_config(&config),
            features: FeatureMap::new(&config, &problem),
            rng: stream(seed, Stream::Bo),
            pref_rng: stream(seed, Stream::PreferenceSample),
            init_rng: stream(seed, Stream::Init),
            observations: Vec::new(),
            remaining,
            config,
            problem,
        })
    }

    fn evaluate(&self, x: Vec<f64>, iteration: usize) -> Result<Observation> {
        let y = self.problem.evaluate(&x);
        if !y.is_finite() {
            return Err(Error::Data(format!("objective is not finite at iteration {iteration}")));
        }
        Ok(Observation { x, y, iteration })
    }

    /// Evaluates `n_init` uniform points (distinct dataset rows for
    /// fingerprints).
    pub fn initial_design(&mut self) -> Result<()> {
        let n = self.config.n_init;
        let mut xs = Vec::with_capacity(n);
        if let Some(set) = self.problem.fingerprints().cloned() {
            if set.len() < n + 1 {
                return Err(Error::Data(format!("fingerprint set of {} rows is too small for n_init {n}", set.len())));
            }
            let mut picked = index::sample(&mut self.rng, self.remaining.len(), n).into_vec();
            picked.sort_unstable_by(|a, b| b.cmp(a));
            for k in picked {
                let row = self.remaining.remove(k);
                xs.push(set.row(row));
            }
        } else {
            let (lb, ub) = (self.config.lb, self.config.ub);
            for _ in 0..n {
                xs.push((0..self.config.dimension).map(|_| self.rng.random_range(lb..=ub)).collect());
            }
        }
        for x in xs {
            let o = self.evaluate(x, 0)?;
            self.observations.push(o);
        }
        Ok(())
    }

    pub fn observation_set(&self) -> ObservationSet {
        ObservationSet {
            observations: self.observations.clone(),
            lb: self.config.lb,
            ub: self.config.ub,
        }
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    fn pool(&mut self) -> Result<CandidatePool> {
        match self.problem.fingerprints().cloned() {
            Some(set) => make_pool(
                &self.config,
                PoolSource::Dataset {
                    set: &set,
                    remaining: &self.remaining,
                },
                &mut self.rng,
            ),
            None => make_pool(&self.config, PoolSource::Sobol, &mut self.rng),
        }
    }

    fn surrogate_sample(&mut self, pool: &DMatrix<f64>, jitter: Jitter) -> Result<DVector<f64>> {
        let d = pool.ncols();
        let x = self.features.matrix(self.observations.iter().map(|o| o.x.as_slice()), d);
        let y = DVector::from_iterator(self.observations.len(), self.observations.iter().map(|o| o.y));
        self.surrogate.sample(&x, &y, pool, jitter, &mut self.rng, &mut self.init_rng)
    }

    /// Runs iteration `t` (1-based) against the given preference snapshot.
    pub fn iterate(&mut self, t: usize, pref: Option<&PosteriorSnapshot>) -> Result<IterationOutcome> {
        let pool = self.pool()?;
        let feats = self.features.apply_matrix(&pool.points);

        // retry once with doubled jitter from the same random state
        let (rng0, init0, surrogate0) = (self.rng.clone(), self.init_rng.clone(), self.surrogate.clone());
        let f_hat = match self.surrogate_sample(&feats, Jitter::default()) {
            Ok(f) => f,
            Err(first) => {
                log::warn!("surrogate failed at iteration {t} ({first}); retrying with doubled jitter");
                self.rng = rng0;
                self.init_rng = init0;
                self.surrogate = surrogate0;
                self.surrogate_sample(&feats, Jitter::default().doubled())
                    .map_err(|e| Error::Aborted {
                        iteration: t,
                        reason: format!("surrogate failed twice: {e}"),
                    })?
            }
        };

        let gamma = self.schedule.gamma(t - 1);
        let r_hat = match pref {
            Some(snap) if gamma != 0.0 => match pref_thompson_sample(&snap.payload, &feats, &mut self.pref_rng) {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("preference sample failed at iteration {t}: {e}; using plain Thompson sampling");
                    None
                }
            },
            _ => None,
        };

        let acq = acquire_expats(&f_hat, r_hat.as_ref(), gamma, &pool, self.config.zscore_combine)?;
        if !pool.rows.is_empty() {
            let row = pool.rows[acq.index];
            self.remaining.retain(|&r| r != row);
        }
        let observation = self.evaluate(acq.x_next, t)?;
        self.observations.push(observation.clone());
        Ok(IterationOutcome {
            observation,
            pref_version: pref.map(|s| s.version),
        })
    }

    /// Best observation so far (first maximum).
    pub fn incumbent(&self) -> &Observation {
        self.observations
            .iter()
            .fold(None, |acc: Option<&Observation>, o| match acc {
                Some(b) if b.y >= o.y => Some(b),
                _ => Some(o),
            })
            .expect("initial design is non-empty")
    }
}
