//! MAP training of the regression network and its linearized Laplace
//! posterior.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{Mlp, MlpArchitecture};
use crate::error::{Error, Result};
use crate::gp::standardize;
use crate::linalg::{symmetrize, LowRankPrecision};
use crate::optim::Adam;
use crate::scalar::Scalar;

/// Prior precisions tried by the evidence search: `10^-3, 10^-2.5, …, 10^3`.
pub const EVIDENCE_GRID: [f64; 13] = [
    1e-3,
    3.162_277_660_168_379_5e-3,
    1e-2,
    3.162_277_660_168_379_5e-2,
    1e-1,
    3.162_277_660_168_379_5e-1,
    1.0,
    3.162_277_660_168_379_5,
    10.0,
    31.622_776_601_683_793,
    100.0,
    316.227_766_016_837_9,
    1000.0,
];

#[derive(Debug, Clone)]
pub struct RegressionOptions<T: Scalar> {
    pub steps: usize,
    pub lr: f64,
    pub prior_precision: f64,
    /// Likelihood variance on the standardized scale.
    pub noise_variance: f64,
    /// Warm start; a fresh initialization is drawn from the rng otherwise.
    pub init: Option<DVector<T>>,
}

impl<T: Scalar> Default for RegressionOptions<T> {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 1e-3,
            prior_precision: 1e-3,
            noise_variance: 1e-2,
            init: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedNetwork<T: Scalar> {
    pub architecture: MlpArchitecture,
    pub theta_star: DVector<T>,
    /// Regularized loss at `theta_star`.
    pub final_loss: T,
    /// Loss before every Adam step, then the final loss.
    pub loss_curve: Vec<T>,
    /// `‖∇L(θ*)‖₂`, recorded as a stationarity diagnostic.
    pub grad_norm: T,
    pub prior_precision: f64,
    pub noise_variance: f64,
    pub target_mean: T,
    pub target_std: T,
}

impl<T: Scalar> TrainedNetwork<T> {
    pub fn mlp(&self) -> Mlp<'_, T> {
        Mlp {
            arch: &self.architecture,
            theta: &self.theta_star,
        }
    }

    /// Un-standardized predictions of the MAP network.
    pub fn predict(&self, x: &DMatrix<T>) -> Result<DVector<T>> {
        Ok(self.mlp().forward(x)?.map(|v| v * self.target_std + self.target_mean))
    }
}

fn regression_loss<T: Scalar>(
    net: Mlp<'_, T>,
    x: &DMatrix<T>,
    ys: &DVector<T>,
    lambda: T,
) -> Result<(T, DVector<T>)> {
    let m = T::lit(ys.len() as f64);
    let out = net.forward(x)?;
    let resid = out - ys;
    let (_, mut grad) = net.vjp(x, &(&resid * (T::lit(2.0) / m)))?;
    grad.axpy(lambda, net.theta, T::one());
    let loss = resid.norm_squared() / m + lambda * T::lit(0.5) * net.theta.norm_squared();
    Ok((loss, grad))
}

/// Full-batch Adam on `mean((f(x) − y)²) + λ/2 ‖θ‖²` with standardized `y`.
pub fn train_regression<T: Scalar, R: Rng + ?Sized>(
    x: &DMatrix<T>,
    y: &DVector<T>,
    arch: &MlpArchitecture,
    opts: &RegressionOptions<T>,
    rng: &mut R,
) -> Result<TrainedNetwork<T>> {
    arch.check()?;
    if x.nrows() < 2 || y.len() != x.nrows() {
        return Err(Error::Data(format!(
            "regression needs at least 2 observations with matching targets (got {} inputs, {} targets)",
            x.nrows(),
            y.len()
        )));
    }
    let (ys, mean, std) = standardize(y);
    let mut theta = match &opts.init {
        Some(t) if t.len() == arch.n_params() => t.clone(),
        Some(t) => {
            return Err(Error::Dimension(format!(
                "warm start has {} parameters, architecture has {}",
                t.len(),
                arch.n_params()
            )))
        }
        None => arch.init(rng),
    };
    let lambda = T::lit(opts.prior_precision);
    let mut adam = Adam::new(theta.len(), opts.lr);
    let mut curve = Vec::with_capacity(opts.steps + 1);
    for step in 0..=opts.steps {
        let (loss, grad) = regression_loss(Mlp { arch, theta: &theta }, x, &ys, lambda)?;
        if !loss.is_finite_value() || !grad.iter().all(|g| g.is_finite_value()) {
            return Err(Error::Training(format!(
                "regression loss became non-finite at step {step} (loss {})",
                loss.as_f64()
            )));
        }
        curve.push(loss);
        if step == opts.steps {
            return Ok(TrainedNetwork {
                architecture: arch.clone(),
                theta_star: theta,
                final_loss: loss,
                loss_curve: curve,
                grad_norm: grad.norm(),
                prior_precision: opts.prior_precision,
                noise_variance: opts.noise_variance,
                target_mean: mean,
                target_std: std,
            });
        }
        adam.step(&mut theta, &grad);
    }
    unreachable!()
}

/// Gaussian `N(θ*, Σ)` with `Σ = (JᵀJ/σ² + λI)⁻¹` and its lower Cholesky
/// factor.
#[derive(Debug, Clone)]
pub struct LaplacePosterior<T: Scalar> {
    pub network: TrainedNetwork<T>,
    pub prior_precision: f64,
    pub covariance_chol: DMatrix<T>,
    /// `(λ, log evidence)` over the search grid.
    pub evidence: Vec<(f64, f64)>,
    pub curvature: LowRankPrecision<T>,
}

/// Laplace log evidence up to λ-independent terms:
/// `P/2 log λ − λ/2 ‖θ*‖² − ½ log det(λI + GGN)`.
pub fn log_evidence<T: Scalar>(curv: &LowRankPrecision<T>, theta_sq: f64, lambda: f64) -> f64 {
    let p = curv.dim() as f64;
    0.5 * p * lambda.ln() - 0.5 * lambda * theta_sq - 0.5 * curv.log_det(T::lit(lambda)).as_f64()
}

/// GGN Laplace around the trained network, prior precision picked by
/// maximizing the evidence over [`EVIDENCE_GRID`].
pub fn fit_laplace_regression<T: Scalar>(net: TrainedNetwork<T>, x: &DMatrix<T>) -> Result<LaplacePosterior<T>> {
    let (_, j) = net.mlp().jacobian(x)?;
    let curvature = LowRankPrecision::new(j / T::lit(net.noise_variance.sqrt()));
    let theta_sq = net.theta_star.norm_squared().as_f64();
    let evidence: Vec<(f64, f64)> = EVIDENCE_GRID
        .iter()
        .map(|&l| (l, log_evidence(&curvature, theta_sq, l)))
        .collect();
    let best = evidence
        .iter()
        .fold(evidence[0], |a, &b| if b.1 > a.1 { b } else { a })
        .0;
    let covariance_chol = curvature.covariance_factor(T::lit(best))?;
    Ok(LaplacePosterior {
        network: net,
        prior_precision: best,
        covariance_chol,
        evidence,
        curvature,
    })
}

impl<T: Scalar> LaplacePosterior<T> {
    /// The same posterior refactored at another prior precision.
    pub fn at_precision(&self, lambda: f64) -> Result<Self> {
        Ok(Self {
            prior_precision: lambda,
            covariance_chol: self.curvature.covariance_factor(T::lit(lambda))?,
            ..self.clone()
        })
    }

    pub fn covariance(&self) -> DMatrix<T> {
        let mut s = &self.covariance_chol * self.covariance_chol.transpose();
        symmetrize(&mut s);
        s
    }
}

/// Linearized predictive on the network's own scale: mean `f(x)` and
/// covariance `(J L)(J L)ᵀ`.
pub(crate) fn linearized_predict<T: Scalar>(
    arch: &MlpArchitecture,
    theta: &DVector<T>,
    chol: &DMatrix<T>,
    pool: &DMatrix<T>,
) -> Result<(DVector<T>, DMatrix<T>)> {
    let (out, j) = Mlp { arch, theta }.jacobian(pool)?;
    let jl = j * chol;
    let mut cov = &jl * jl.transpose();
    symmetrize(&mut cov);
    Ok((out, cov))
}

/// `f(x) + J(x) L ε` on the network's own scale.
pub(crate) fn linearized_sample<T: Scalar>(
    arch: &MlpArchitecture,
    theta: &DVector<T>,
    chol: &DMatrix<T>,
    pool: &DMatrix<T>,
    eps: &DVector<T>,
) -> Result<DVector<T>> {
    if eps.len() != theta.len() {
        return Err(Error::Dimension(format!(
            "noise vector of length {} for {} parameters",
            eps.len(),
            theta.len()
        )));
    }
    let delta = chol * eps;
    let (out, jt) = Mlp { arch, theta }.jvp(pool, &delta)?;
    Ok(out + jt)
}

pub(crate) fn check_pool(n: usize) -> Result<()> {
    if n > crate::acquisition::MAX_POOL {
        return Err(Error::Dimension(format!(
            "pool of {n} exceeds {}",
            crate::acquisition::MAX_POOL
        )));
    }
    Ok(())
}

pub fn lla_predict<T: Scalar>(post: &LaplacePosterior<T>, pool: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    check_pool(pool.nrows())?;
    let net = &post.network;
    let (mean, mut cov) = linearized_predict(&net.architecture, &net.theta_star, &post.covariance_chol, pool)?;
    let s2 = net.target_std * net.target_std;
    cov *= s2;
    let jitter = T::lit(1e-12) * s2;
    for i in 0..cov.nrows() {
        cov[(i, i)] += jitter;
    }
    Ok((mean.map(|v| v * net.target_std + net.target_mean), cov))
}

/// Linearized sample with an explicit standard-normal vector `ε`
/// (`θ = θ* + Lε`).
pub fn lla_sample_with_noise<T: Scalar>(
    post: &LaplacePosterior<T>,
    pool: &DMatrix<T>,
    eps: &DVector<T>,
) -> Result<DVector<T>> {
    check_pool(pool.nrows())?;
    let net = &post.network;
    let f = linearized_sample(&net.architecture, &net.theta_star, &post.covariance_chol, pool, eps)?;
    Ok(f.map(|v| v * net.target_std + net.target_mean))
}

pub fn lla_thompson_sample<T: Scalar, R: Rng + ?Sized>(
    post: &LaplacePosterior<T>,
    pool: &DMatrix<T>,
    rng: &mut R,
) -> Result<DVector<T>> {
    let eps = DVector::from_fn(post.network.theta_star.len(), |_, _| T::standard_normal(rng));
    lla_sample_with_noise(post, pool, &eps)
}
