//! Gaussian-process regression surrogate.
//!
//! Targets are standardized before fitting and un-standardized at
//! prediction. Hyperparameters are fitted with Adam on the log marginal
//! likelihood, warm-started from a previous iterate when one is given.

pub mod kernel;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub use kernel::{matern52, tanimoto, Kernel, KernelParams};

use crate::config::KernelKind;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, symmetrize, Jitter};
use crate::optim::Adam;
use crate::scalar::Scalar;
use kernel::rows_of;

/// Largest pool for which joint posterior samples are drawn densely.
pub const MAX_SAMPLE_POOL: usize = 4096;

#[derive(Debug, Clone)]
pub struct GpFitOptions<T: Scalar> {
    pub steps: usize,
    pub lr: f64,
    /// Warm start; `None` starts from [`KernelParams::initial`].
    pub init: Option<KernelParams<T>>,
    pub jitter: Jitter,
}

impl<T: Scalar> Default for GpFitOptions<T> {
    fn default() -> Self {
        Self {
            steps: 50,
            lr: 0.05,
            init: None,
            jitter: Jitter::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GpPosterior<T: Scalar> {
    pub kind: KernelKind,
    pub params: KernelParams<T>,
    pub train_inputs: Vec<Vec<T>>,
    pub train_targets_standardized: DVector<T>,
    pub target_mean: T,
    pub target_std: T,
    /// Lower Cholesky factor of `K + σ²I` (plus any jitter that was needed).
    pub chol_k: DMatrix<T>,
    pub alpha: DVector<T>,
    pub jitter: Jitter,
}

#[derive(Debug, Clone)]
pub struct GpFit<T: Scalar> {
    pub posterior: GpPosterior<T>,
    /// Log marginal likelihood (standardized targets) at every iterate,
    /// the initial one first and the final one last.
    pub lml_curve: Vec<T>,
}

struct Evaluation<T: Scalar> {
    lml: T,
    grad: DVector<T>,
}

/// Mean and standard deviation used to standardize targets; a constant
/// target vector gets unit scale.
pub fn standardize<T: Scalar>(y: &DVector<T>) -> (DVector<T>, T, T) {
    let n = T::lit(y.len() as f64);
    let mean = y.sum() / n;
    let var = y.iter().fold(T::zero(), |a, v| a + (*v - mean) * (*v - mean)) / n;
    let mut std = var.sqrt();
    if !(std > T::lit(1e-12)) {
        std = T::one();
    }
    (y.map(|v| (v - mean) / std), mean, std)
}

fn noisy_gram<T: Scalar>(kernel: &Kernel<T>, x: &[Vec<T>]) -> (DMatrix<T>, DMatrix<T>) {
    let kf = kernel.gram(x);
    let mut k = kf.clone();
    let noise = kernel.params.noise_variance();
    for i in 0..k.nrows() {
        k[(i, i)] += noise;
    }
    (kf, k)
}

fn evaluate<T: Scalar>(
    kind: KernelKind,
    params: &KernelParams<T>,
    x: &[Vec<T>],
    y: &DVector<T>,
    jitter: Jitter,
) -> Result<Evaluation<T>> {
    let kernel = Kernel::new(kind, params.clone());
    let (kf, k) = noisy_gram(&kernel, x);
    let (chol, _) = cholesky_jittered(&k, jitter, "GP marginal likelihood")?;
    let alpha = chol.solve(y);
    let m = T::lit(y.len() as f64);
    let log_det_half = chol.l().diagonal().iter().fold(T::zero(), |a, d| a + d.ln());
    let lml = -T::lit(0.5) * y.dot(&alpha) - log_det_half - T::lit(0.5) * m * T::two_pi().ln();

    // ∂lml/∂θ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ)
    let mut w = &alpha * alpha.transpose() - chol.inverse();
    symmetrize(&mut w);
    let half = T::lit(0.5);
    let d = params.log_lengthscales.len();
    let mut grad = DVector::zeros(d + 2);
    grad.rows_mut(0, d).copy_from(&kernel.lengthscale_gradient(x, &w));
    grad[d] = half * w.component_mul(&kf).sum();
    // the clamp at the floor makes the noise gradient vanish below it
    let noise = params.log_noise_variance.exp();
    grad[d + 1] = if noise > T::lit(kernel::NOISE_FLOOR) {
        half * noise * w.trace()
    } else {
        T::zero()
    };
    Ok(Evaluation { lml, grad })
}

/// Fits hyperparameters by `steps` Adam updates on the negative log marginal
/// likelihood, then conditions on the data.
pub fn fit_gp<T: Scalar>(
    x: &DMatrix<T>,
    y: &DVector<T>,
    kind: KernelKind,
    opts: &GpFitOptions<T>,
) -> Result<GpFit<T>> {
    let m = x.nrows();
    if m < 2 || y.len() != m {
        return Err(Error::Data(format!(
            "GP fit needs at least 2 observations with matching targets (got {m} inputs, {} targets)",
            y.len()
        )));
    }
    if kind == KernelKind::Tanimoto && x.iter().any(|v| *v != T::zero() && *v != T::one()) {
        return Err(Error::Data("tanimoto kernel needs binary inputs".into()));
    }
    let d = x.ncols();
    let pts = rows_of(x);
    let (ys, mean, std) = standardize(y);

    let mut params = opts.init.clone().unwrap_or_else(|| KernelParams::initial(kind, d));
    if kind == KernelKind::Matern52 && params.log_lengthscales.len() != d {
        return Err(Error::Dimension(format!(
            "{} lengthscales for {d}-dimensional inputs",
            params.log_lengthscales.len()
        )));
    }
    params.clamp();
    let mut theta = params.pack();
    let mut adam = Adam::new(theta.len(), opts.lr);
    let mut curve = Vec::with_capacity(opts.steps + 1);
    for _ in 0..opts.steps {
        let eval = evaluate(kind, &KernelParams::unpack(&theta), &pts, &ys, opts.jitter)?;
        curve.push(eval.lml);
        adam.step(&mut theta, &(-eval.grad));
        let mut p = KernelParams::unpack(&theta);
        p.clamp();
        theta = p.pack();
    }
    let params = KernelParams::unpack(&theta);
    let posterior = condition(kind, params, pts, ys, mean, std, opts.jitter)?;
    curve.push(posterior.log_marginal_likelihood());
    Ok(GpFit {
        posterior,
        lml_curve: curve,
    })
}

/// Conditions a GP with fixed hyperparameters on data (no fitting).
pub fn condition_gp<T: Scalar>(
    x: &DMatrix<T>,
    y: &DVector<T>,
    kind: KernelKind,
    params: KernelParams<T>,
    jitter: Jitter,
) -> Result<GpPosterior<T>> {
    let (ys, mean, std) = standardize(y);
    condition(kind, params, rows_of(x), ys, mean, std, jitter)
}

fn condition<T: Scalar>(
    kind: KernelKind,
    params: KernelParams<T>,
    pts: Vec<Vec<T>>,
    ys: DVector<T>,
    mean: T,
    std: T,
    jitter: Jitter,
) -> Result<GpPosterior<T>> {
    let kernel = Kernel::new(kind, params.clone());
    let (_, k) = noisy_gram(&kernel, &pts);
    let (chol, _) = cholesky_jittered(&k, jitter, "GP training covariance")?;
    let alpha = chol.solve(&ys);
    Ok(GpPosterior {
        kind,
        params,
        train_inputs: pts,
        train_targets_standardized: ys,
        target_mean: mean,
        target_std: std,
        chol_k: chol.l(),
        alpha,
        jitter,
    })
}

impl<T: Scalar> GpPosterior<T> {
    pub fn kernel(&self) -> Kernel<T> {
        Kernel::new(self.kind, self.params.clone())
    }

    pub fn log_marginal_likelihood(&self) -> T {
        let m = T::lit(self.alpha.len() as f64);
        let half_logdet = self.chol_k.diagonal().iter().fold(T::zero(), |a, d| a + d.ln());
        -T::lit(0.5) * self.train_targets_standardized.dot(&self.alpha)
            - half_logdet
            - T::lit(0.5) * m * T::two_pi().ln()
    }

    /// Predictive mean and covariance of the latent function on the
    /// standardized scale.
    pub fn predict_standardized(&self, pool: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
        let kernel = self.kernel();
        let q = rows_of(pool);
        let ks = kernel.cross(&q, &self.train_inputs);
        let mean = &ks * &self.alpha;
        let v = self
            .chol_k
            .solve_lower_triangular(&ks.transpose())
            .expect("cholesky factor has a positive diagonal");
        let mut cov = kernel.gram(&q) - v.transpose() * &v;
        symmetrize(&mut cov);
        (mean, cov)
    }
}

/// Predictive mean and covariance of `f` on `pool` (rows are points).
pub fn gp_predict<T: Scalar>(post: &GpPosterior<T>, pool: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let (mean_s, mut cov) = post.predict_standardized(pool);
    let s2 = post.target_std * post.target_std;
    cov *= s2;
    let jitter = T::lit(1e-12) * s2;
    for i in 0..cov.nrows() {
        cov[(i, i)] += jitter;
    }
    (mean_s.map(|v| v * post.target_std + post.target_mean), cov)
}

/// Joint posterior sample `f̂ = μ + Lε` over the pool.
pub fn gp_thompson_sample<T: Scalar, R: Rng + ?Sized>(
    post: &GpPosterior<T>,
    pool: &DMatrix<T>,
    rng: &mut R,
) -> Result<DVector<T>> {
    let n = pool.nrows();
    if n > MAX_SAMPLE_POOL {
        return Err(Error::Dimension(format!("pool of {n} exceeds {MAX_SAMPLE_POOL}")));
    }
    let (mean, cov) = post.predict_standardized(pool);
    let (chol, _) = cholesky_jittered(&cov, post.jitter, "GP predictive covariance")?;
    let eps = DVector::from_fn(n, |_, _| T::standard_normal(rng));
    let sample = mean + chol.l() * eps;
    Ok(sample.map(|v| v * post.target_std + post.target_mean))
}
