//! The objective surrogate as used by the BO loop: fit on `D_t`, then draw
//! one joint Thompson sample over the pool. Hyperparameters (GP) and
//! weights (network) are warm-started across iterations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::config::{CampaignConfig, KernelKind, SurrogateKind};
use crate::error::Result;
use crate::gp::{fit_gp, gp_thompson_sample, GpFitOptions, KernelParams};
use crate::linalg::Jitter;
use crate::nn::{fit_laplace_regression, lla_thompson_sample, train_regression, MlpArchitecture, RegressionOptions};

#[derive(Debug, Clone)]
pub enum Surrogate {
    Gp {
        kind: KernelKind,
        params: Option<KernelParams<f64>>,
    },
    Laplace {
        arch: MlpArchitecture,
        theta: Option<DVector<f64>>,
    },
}

impl Surrogate {
    pub fn for_config(config: &CampaignConfig) -> Self {
        match config.surrogate_kind {
            SurrogateKind::Gp => Surrogate::Gp {
                kind: config.kernel_kind,
                params: None,
            },
            SurrogateKind::LaplaceMlp => Surrogate::Laplace {
                arch: MlpArchitecture::standard(config.dimension),
                theta: None,
            },
        }
    }

    /// Fits on `(x, y)` and samples `f̂` on `pool`. `init_rng` is only used
    /// the first time a network is initialized. The warm-start state is
    /// updated only when the whole step succeeds.
    pub fn sample<R: Rng + ?Sized, S: Rng + ?Sized>(
        &mut self,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        pool: &DMatrix<f64>,
        jitter: Jitter,
        rng: &mut R,
        init_rng: &mut S,
    ) -> Result<DVector<f64>> {
        match self {
            Surrogate::Gp { kind, params } => {
                let opts = GpFitOptions {
                    init: params.clone(),
                    jitter,
                    ..Default::default()
                };
                let fit = fit_gp(x, y, *kind, &opts)?;
                let f = gp_thompson_sample(&fit.posterior, pool, rng)?;
                *params = Some(fit.posterior.params);
                Ok(f)
            }
            Surrogate::Laplace { arch, theta } => {
                let opts = RegressionOptions {
                    init: theta.clone(),
                    ..Default::default()
                };
                let net = train_regression(x, y, arch, &opts, init_rng)?;
                let post = fit_laplace_regression(net, x)?;
                let f = lla_thompson_sample(&post, pool, rng)?;
                *theta = Some(post.network.theta_star);
                Ok(f)
            }
        }
    }
}
