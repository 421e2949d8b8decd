//! Bayesian Bradley-Terry preference model.
//!
//! A scoring network `r_ψ` is trained on labeled pairs by MAP, then a GGN
//! Laplace approximation gives the posterior over `ψ`. Scores are only
//! identified up to a constant, so everything downstream consumes score
//! differences or softmax probabilities.

pub mod format;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::LowRankPrecision;
use crate::nn::laplace::{check_pool, linearized_predict, linearized_sample};
use crate::nn::{Mlp, MlpArchitecture};
use crate::optim::Adam;
use crate::scalar::Scalar;
use crate::snapshot::{Snapshot, Validate};
use crate::types::PreferenceExample;

pub use format::{read_snapshot, write_snapshot};

/// Published preference posterior as seen by the BO loop.
pub type PosteriorSnapshot<T = f64> = Snapshot<PreferencePosterior<T>>;

/// Probability of the observed label under the Bradley-Terry model:
/// `exp(r_w) / (exp(r0) + exp(r1))` with `w` the labeled winner, evaluated
/// as a logistic of the score gap so that neither exponential overflows.
pub fn bt_likelihood(r0: f64, r1: f64, label: u8) -> f64 {
    let (w, l) = if label == 0 { (r0, r1) } else { (r1, r0) };
    sigmoid(w - l)
}

/// `log(1 + eˣ)` without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    let zero = T::zero();
    let m = if x > zero { x } else { zero };
    m + (T::one() + (-x.abs()).exp()).ln()
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Labeled pairs as matrices on the network's input scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PairData<T: Scalar> {
    pub x0: DMatrix<T>,
    pub x1: DMatrix<T>,
    pub labels: Vec<u8>,
}

impl<T: Scalar> PairData<T> {
    /// `features` maps a design point to network inputs (e.g. the unit cube).
    pub fn from_examples(examples: &[PreferenceExample], features: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::Data("no labeled pairs".into()))?;
        let d = features(&first.x0).len();
        let mut x0 = DMatrix::zeros(examples.len(), d);
        let mut x1 = DMatrix::zeros(examples.len(), d);
        for (i, e) in examples.iter().enumerate() {
            for (m, x) in [(&mut x0, &e.x0), (&mut x1, &e.x1)] {
                let f = features(x);
                if f.len() != d {
                    return Err(Error::Dimension(format!("pair {i} has {} features, expected {d}", f.len())));
                }
                for (c, v) in f.into_iter().enumerate() {
                    m[(i, c)] = T::lit(v);
                }
            }
        }
        Ok(Self {
            x0,
            x1,
            labels: examples.iter().map(|e| e.label).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[x0; x1]`, so pair `i` occupies rows `i` and `m + i`.
    fn stacked(&self) -> DMatrix<T> {
        let (m, d) = self.x0.shape();
        let mut x = DMatrix::zeros(2 * m, d);
        x.rows_mut(0, m).copy_from(&self.x0);
        x.rows_mut(m, m).copy_from(&self.x1);
        x
    }

    fn check(&self) -> Result<()> {
        if self.x0.shape() != self.x1.shape() || self.labels.len() != self.x0.nrows() {
            return Err(Error::Dimension("pair matrices and labels disagree in shape".into()));
        }
        if let Some(i) = self.labels.iter().position(|&l| l > 1) {
            return Err(Error::Data(format!("pair {i} has label {}", self.labels[i])));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PreferenceOptions<T: Scalar> {
    pub steps: usize,
    pub lr: f64,
    pub prior_precision: f64,
    /// Warm start, typically the previous snapshot's `ψ*`.
    pub init: Option<DVector<T>>,
}

impl<T: Scalar> Default for PreferenceOptions<T> {
    fn default() -> Self {
        Self {
            steps: 300,
            lr: 1e-3,
            prior_precision: 1.0,
            init: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedScorer<T: Scalar> {
    pub architecture: MlpArchitecture,
    pub psi_star: DVector<T>,
    pub final_loss: T,
    pub loss_curve: Vec<T>,
    pub grad_norm: T,
    pub prior_precision: f64,
}

/// `Σᵢ softplus(r_loser − r_winner) + λ/2 ‖ψ‖²` and its gradient.
pub fn bt_loss<T: Scalar>(net: Mlp<'_, T>, data: &PairData<T>, prior_precision: f64) -> Result<(T, DVector<T>)> {
    data.check()?;
    let m = data.len();
    let x = data.stacked();
    let r = net.forward(&x)?;
    let mut loss = T::zero();
    let mut cot = DVector::zeros(2 * m);
    for i in 0..m {
        let (w, l) = if data.labels[i] == 0 { (i, m + i) } else { (m + i, i) };
        let d = r[l] - r[w];
        loss += softplus(d);
        let s = sigmoid(d);
        cot[w] -= s;
        cot[l] += s;
    }
    let (_, mut grad) = net.vjp(&x, &cot)?;
    let lambda = T::lit(prior_precision);
    grad.axpy(lambda, net.theta, T::one());
    loss += lambda * T::lit(0.5) * net.theta.norm_squared();
    Ok((loss, grad))
}

/// Full-batch Adam on the regularized Bradley-Terry loss.
pub fn train_preference<T: Scalar, R: Rng + ?Sized>(
    data: &PairData<T>,
    arch: &MlpArchitecture,
    opts: &PreferenceOptions<T>,
    rng: &mut R,
) -> Result<TrainedScorer<T>> {
    arch.check()?;
    data.check()?;
    if data.is_empty() {
        return Err(Error::Data("preference training needs at least one labeled pair".into()));
    }
    let mut psi = match &opts.init {
        Some(p) if p.len() == arch.n_params() => p.clone(),
        Some(p) => {
            return Err(Error::Dimension(format!(
                "warm start has {} parameters, architecture has {}",
                p.len(),
                arch.n_params()
            )))
        }
        None => arch.init(rng),
    };
    let mut adam = Adam::new(psi.len(), opts.lr);
    let mut curve = Vec::with_capacity(opts.steps + 1);
    for step in 0..=opts.steps {
        let (loss, grad) = bt_loss(Mlp { arch, theta: &psi }, data, opts.prior_precision)?;
        if !loss.is_finite_value() || !grad.iter().all(|g| g.is_finite_value()) {
            return Err(Error::Training(format!(
                "preference loss became non-finite at step {step} ({} pairs)",
                data.len()
            )));
        }
        curve.push(loss);
        if step == opts.steps {
            return Ok(TrainedScorer {
                architecture: arch.clone(),
                psi_star: psi,
                final_loss: loss,
                loss_curve: curve,
                grad_norm: grad.norm(),
                prior_precision: opts.prior_precision,
            });
        }
        adam.step(&mut psi, &grad);
    }
    unreachable!()
}

/// Laplace posterior `N(ψ*, Σ)` over the scoring network.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePosterior<T: Scalar = f64> {
    pub architecture: MlpArchitecture,
    pub psi_star: DVector<T>,
    /// Lower Cholesky factor of `Σ`.
    pub covariance_chol: DMatrix<T>,
    pub prior_precision: f64,
    pub training_set_size: usize,
    pub final_loss: f64,
}

impl<T: Scalar> Validate for PreferencePosterior<T> {
    fn validate(&self) -> Result<()> {
        let p = self.architecture.n_params();
        if self.psi_star.len() != p || self.covariance_chol.shape() != (p, p) {
            return Err(Error::Snapshot(format!(
                "parameter vector of {} and factor of {:?} for {p} parameters",
                self.psi_star.len(),
                self.covariance_chol.shape()
            )));
        }
        if !self.psi_star.iter().all(|v| v.is_finite_value()) {
            return Err(Error::Snapshot("non-finite MAP parameters".into()));
        }
        if let Some(i) = (0..p).find(|&i| {
            let d = self.covariance_chol[(i, i)];
            !(d > T::zero() && d.is_finite_value())
        }) {
            return Err(Error::Snapshot(format!(
                "covariance factor diagonal entry {i} is {} (must be positive)",
                self.covariance_chol[(i, i)].as_f64()
            )));
        }
        Ok(())
    }
}

/// Rows `√(p₀p₁) (J(x₀) − J(x₁))`, one per pair, whose Gram `GᵀG` is the
/// Bradley-Terry GGN `Σᵢ GᵢᵀΛᵢGᵢ`.
pub fn preference_ggn_factor<T: Scalar>(arch: &MlpArchitecture, psi: &DVector<T>, data: &PairData<T>) -> Result<DMatrix<T>> {
    data.check()?;
    let m = data.len();
    let (r, j) = Mlp { arch, theta: psi }.jacobian(&data.stacked())?;
    let mut g = DMatrix::zeros(m, psi.len());
    for i in 0..m {
        let p0 = sigmoid(r[i] - r[m + i]);
        let w = (p0 * (T::one() - p0)).sqrt();
        let row = (j.row(i) - j.row(m + i)) * w;
        g.set_row(i, &row);
    }
    Ok(g)
}

pub fn fit_laplace_preference<T: Scalar>(net: TrainedScorer<T>, data: &PairData<T>) -> Result<PreferencePosterior<T>> {
    let g = preference_ggn_factor(&net.architecture, &net.psi_star, data)?;
    let covariance_chol = LowRankPrecision::new(g).covariance_factor(T::lit(net.prior_precision))?;
    Ok(PreferencePosterior {
        architecture: net.architecture,
        psi_star: net.psi_star,
        covariance_chol,
        prior_precision: net.prior_precision,
        training_set_size: data.len(),
        final_loss: net.final_loss.as_f64(),
    })
}

impl<T: Scalar> PreferencePosterior<T> {
    pub fn mlp(&self) -> Mlp<'_, T> {
        Mlp {
            arch: &self.architecture,
            theta: &self.psi_star,
        }
    }

    pub fn map_scores(&self, pool: &DMatrix<T>) -> Result<DVector<T>> {
        self.mlp().forward(pool)
    }

    pub fn n_params(&self) -> usize {
        self.psi_star.len()
    }

    /// Linearized score samples on `points`, one column per draw.
    pub fn sample_scores<R: Rng + ?Sized>(&self, points: &DMatrix<T>, n_samples: usize, rng: &mut R) -> Result<DMatrix<T>> {
        let p = self.n_params();
        let eps = DMatrix::from_fn(p, n_samples, |_, _| T::standard_normal(rng));
        let deltas = &self.covariance_chol * eps;
        let mut out = DMatrix::zeros(points.nrows(), n_samples);
        let net = self.mlp();
        for s in 0..n_samples {
            let (r, jt) = net.jvp(points, &deltas.column(s).into_owned())?;
            out.set_column(s, &(r + jt));
        }
        Ok(out)
    }
}

/// Linearized predictive mean and covariance of `r` on the pool.
pub fn pref_predict<T: Scalar>(post: &PreferencePosterior<T>, pool: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    check_pool(pool.nrows())?;
    linearized_predict(&post.architecture, &post.psi_star, &post.covariance_chol, pool)
}

/// `r̂ = r_{ψ*} + J (ψ − ψ*)` with `ψ = ψ* + Lε` for a given `ε`.
pub fn pref_sample_with_noise<T: Scalar>(
    post: &PreferencePosterior<T>,
    pool: &DMatrix<T>,
    eps: &DVector<T>,
) -> Result<DVector<T>> {
    check_pool(pool.nrows())?;
    linearized_sample(&post.architecture, &post.psi_star, &post.covariance_chol, pool, eps)
}

pub fn pref_thompson_sample<T: Scalar, R: Rng + ?Sized>(
    post: &PreferencePosterior<T>,
    pool: &DMatrix<T>,
    rng: &mut R,
) -> Result<DVector<T>> {
    let eps = DVector::from_fn(post.n_params(), |_, _| T::standard_normal(rng));
    pref_sample_with_noise(post, pool, &eps)
}

/// Monte-Carlo estimate of `p(ℓ = 0 | x0, x1)` under the linearized
/// posterior.
pub fn pref_predict_label<T: Scalar, R: Rng + ?Sized>(
    post: &PreferencePosterior<T>,
    x0: &[T],
    x1: &[T],
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::Data("n_samples must be at least 1".into()));
    }
    if x0.len() != x1.len() {
        return Err(Error::Dimension("pair members differ in length".into()));
    }
    let mut pts = DMatrix::zeros(2, x0.len());
    pts.row_mut(0).copy_from_slice(x0);
    pts.row_mut(1).copy_from_slice(x1);
    let r = post.sample_scores(&pts, n_samples, rng)?;
    let total: f64 = (0..n_samples)
        .map(|s| bt_likelihood(r[(0, s)].as_f64(), r[(1, s)].as_f64(), 0))
        .sum();
    Ok(total / n_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_scores_are_a_coin_flip() {
        assert_eq!(bt_likelihood(0.3, 0.3, 0), 0.5);
        assert_eq!(bt_likelihood(0.3, 0.3, 1), 0.5);
    }

    #[test]
    fn extreme_scores_stay_finite() {
        assert_eq!(bt_likelihood(1000.0, -1000.0, 0), 1.0);
        assert_eq!(bt_likelihood(1000.0, -1000.0, 1), 0.0);
        assert!((softplus(800.0f64) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0f64) >= 0.0);
    }

    fn one_pair() -> PairData<f64> {
        PairData {
            x0: DMatrix::from_row_slice(1, 2, &[0.2, 0.9]),
            x1: DMatrix::from_row_slice(1, 2, &[0.7, 0.1]),
            labels: vec![1],
        }
    }

    #[test]
    fn single_pair_is_learned() {
        let arch = MlpArchitecture::new(2, vec![8, 8]);
        let opts = PreferenceOptions {
            steps: 2000,
            lr: 1e-2,
            prior_precision: 1e-3,
            init: None,
        };
        let data = one_pair();
        let net = train_preference(&data, &arch, &opts, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let r = Mlp { arch: &arch, theta: &net.psi_star }.forward(&data.stacked()).unwrap();
        assert!(bt_likelihood(r[0], r[1], 1) > 0.9);
    }

    #[test]
    fn empty_data_rejected() {
        let arch = MlpArchitecture::new(2, vec![4]);
        let data = PairData::<f64> {
            x0: DMatrix::zeros(0, 2),
            x1: DMatrix::zeros(0, 2),
            labels: vec![],
        };
        assert!(train_preference(&data, &arch, &PreferenceOptions::default(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn validation_rejects_bad_factor() {
        let arch = MlpArchitecture::new(1, vec![]);
        let mut post = PreferencePosterior::<f64> {
            architecture: arch,
            psi_star: DVector::zeros(2),
            covariance_chol: DMatrix::identity(2, 2),
            prior_precision: 1.0,
            training_set_size: 0,
            final_loss: 0.0,
        };
        assert!(post.validate().is_ok());
        post.covariance_chol[(1, 1)] = 0.0;
        let err = post.validate().unwrap_err().to_string();
        assert!(err.contains("diagonal entry 1"), "{err}");
    }

    #[test]
    fn identical_points_give_one_half() {
        let arch = MlpArchitecture::new(2, vec![4]);
        let data = one_pair();
        let net = train_preference(&data, &arch, &PreferenceOptions::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let post = fit_laplace_preference(net, &data).unwrap();
        let x = [0.3, 0.4];
        let p = pref_predict_label(&post, &x, &x, 32, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(p, 0.5);
    }
}
