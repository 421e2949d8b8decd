use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hitlbo::nn::laplace::{
    fit_laplace_regression, lla_predict, lla_thompson_sample, train_regression, RegressionOptions, EVIDENCE_GRID,
};
use hitlbo::nn::{Mlp, MlpArchitecture};

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
}

/// Central differences of the scalar output w.r.t. every parameter.
fn fd_jacobian(arch: &MlpArchitecture, theta: &DVector<f64>, x: &[f64]) -> DVector<f64> {
    let h = 1e-6;
    DVector::from_fn(theta.len(), |k, _| {
        let mut plus = theta.clone();
        plus[k] += h;
        let mut minus = theta.clone();
        minus[k] -= h;
        let fp = Mlp::new(arch, &plus).unwrap().forward_one(x).unwrap();
        let fm = Mlp::new(arch, &minus).unwrap().forward_one(x).unwrap();
        (fp - fm) / (2.0 * h)
    })
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let arch = MlpArchitecture::new(4, vec![12, 9]);
    let theta: DVector<f64> = DVector::from_fn(arch.n_params(), |_, _| rng.random_range(-0.8..0.8));
    let x = random_matrix(&mut rng, 10, 4);
    let (_, j) = Mlp::new(&arch, &theta).unwrap().jacobian(&x).unwrap();
    for i in 0..10 {
        let xi: Vec<f64> = x.row(i).iter().copied().collect();
        let fd = fd_jacobian(&arch, &theta, &xi);
        let row = j.row(i).transpose();
        let rel = (&row - &fd).norm() / fd.norm();
        assert!(rel < 1e-4, "point {i}: relative error {rel}");
    }
}

struct Fixture {
    x: DMatrix<f64>,
    post: hitlbo::LaplacePosterior,
}

/// A small regression problem with a dense-invertible parameter count.
fn small_fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = MlpArchitecture::new(2, vec![8, 6]);
    let x = random_matrix(&mut rng, 20, 2);
    let y = DVector::from_fn(20, |i, _| (2.0 * x[(i, 0)]).sin() * x[(i, 1)] + 3.0);
    let net = train_regression(&x, &y, &arch, &RegressionOptions::default(), &mut rng).unwrap();
    let post = fit_laplace_regression(net, &x).unwrap();
    Fixture { x, post }
}

#[test]
fn ggn_is_psd() {
    let f = small_fixture(1);
    let ggn = f.post.curvature.dense_precision(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let v = DVector::from_fn(ggn.nrows(), |_, _| rng.random_range(-1.0..1.0));
        assert!((v.transpose() * &ggn * &v)[0] >= -1e-10);
    }
}

#[test]
fn predictive_covariance_matches_dense_oracle() {
    let f = small_fixture(3);
    let net = &f.post.network;
    let mlp = net.mlp();
    let (_, j) = mlp.jacobian(&f.x).unwrap();
    let p = net.theta_star.len();
    let precision = j.transpose() * &j / net.noise_variance + DMatrix::identity(p, p) * f.post.prior_precision;
    let sigma = precision.try_inverse().unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pool = random_matrix(&mut rng, 2, 2);
    let (_, jp) = mlp.jacobian(&pool).unwrap();
    let s2 = net.target_std * net.target_std;
    let oracle = &jp * &sigma * jp.transpose() * s2;
    let (mean, cov) = lla_predict(&f.post, &pool).unwrap();
    let map = net.predict(&pool).unwrap();
    for i in 0..2 {
        assert!((mean[i] - map[i]).abs() < 1e-12);
        for k in 0..2 {
            assert!(
                (cov[(i, k)] - oracle[(i, k)]).abs() < 1e-8,
                "cov {i},{k}: {} vs {}",
                cov[(i, k)],
                oracle[(i, k)]
            );
        }
    }
}

#[test]
fn thompson_samples_match_linearized_predictive() {
    let f = small_fixture(5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pool = random_matrix(&mut rng, 3, 2);
    let (mean, cov) = lla_predict(&f.post, &pool).unwrap();
    let n = 10_000;
    let draws: Vec<DVector<f64>> = (0..n).map(|_| lla_thompson_sample(&f.post, &pool, &mut rng).unwrap()).collect();
    let emp_mean = draws.iter().fold(DVector::zeros(3), |a, d| a + d) / n as f64;
    for i in 0..3 {
        let se = (cov[(i, i)] / n as f64).sqrt();
        assert!((emp_mean[i] - mean[i]).abs() < 3.0 * se, "coordinate {i}");
    }
    let mut emp_cov = DMatrix::zeros(3, 3);
    for d in &draws {
        let c = d - &emp_mean;
        emp_cov += &c * c.transpose();
    }
    emp_cov /= (n - 1) as f64;
    let rel = (&emp_cov - &cov).norm() / cov.norm();
    assert!(rel < 0.1, "Frobenius relative error {rel}");
}

#[test]
fn variance_shrinks_along_the_evidence_grid() {
    let f = small_fixture(7);
    let pool = random_matrix(&mut ChaCha8Rng::seed_from_u64(8), 16, 2);
    let mut prev: Option<DVector<f64>> = None;
    for &l in EVIDENCE_GRID.iter() {
        let (_, cov) = lla_predict(&f.post.at_precision(l).unwrap(), &pool).unwrap();
        let var = cov.diagonal();
        if let Some(p) = &prev {
            for i in 0..16 {
                assert!(var[i] <= p[i] * (1.0 + 1e-9) + 1e-15, "λ = {l}, point {i}");
            }
        }
        prev = Some(var);
    }
    // the largest precision approaches a point mass
    let (_, cov) = lla_predict(&f.post.at_precision(1e3).unwrap(), &pool).unwrap();
    let (_, cov_small) = lla_predict(&f.post.at_precision(1e-3).unwrap(), &pool).unwrap();
    assert!(cov.trace() < 1e-2 * cov_small.trace());
}

#[test]
fn samples_are_bitwise_reproducible() {
    let f = small_fixture(9);
    let pool = random_matrix(&mut ChaCha8Rng::seed_from_u64(10), 32, 2);
    let a = lla_thompson_sample(&f.post, &pool, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let b = lla_thompson_sample(&f.post, &pool, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
}

/// 50 evenly spaced points of `sin(πx)` on `[-1, 1]`, standard
/// architecture, default training, network init seed 0.
fn sine_fixture() -> (DMatrix<f64>, DVector<f64>, hitlbo::LaplacePosterior) {
    let x = DMatrix::from_fn(50, 1, |i, _| -1.0 + 2.0 * i as f64 / 49.0);
    let y = x.column(0).map(|v| (std::f64::consts::PI * v).sin());
    let net = train_regression(
        &x,
        &y,
        &MlpArchitecture::standard(1),
        &RegressionOptions::default(),
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    let post = fit_laplace_regression(net, &x).unwrap();
    (x, y, post)
}

#[test]
fn sine_fixture_is_fitted() {
    let (x, y, post) = sine_fixture();
    let net = &post.network;
    let pred = net.mlp().forward(&x).unwrap();
    let ys = y.map(|v| (v - net.target_mean) / net.target_std);
    let rmse = ((pred - ys).norm_squared() / 50.0).sqrt();
    assert!(rmse < 0.1, "standardized train RMSE {rmse}");
}

#[test]
fn sine_fixture_evidence_choice() {
    let (_, _, post) = sine_fixture();
    let best = post
        .evidence
        .iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |a, &b| if b.1 > a.1 { b } else { a });
    assert_eq!(post.prior_precision, best.0);
    assert_eq!(post.prior_precision, SINE_FIXTURE_PRECISION, "evidence curve {:?}", post.evidence);
}

/// Recorded when the fixture was first run.
const SINE_FIXTURE_PRECISION: f64 = 1.0;

#[test]
fn evidence_matches_dense_log_determinant() {
    let f = small_fixture(12);
    let net = &f.post.network;
    let (_, j) = net.mlp().jacobian(&f.x).unwrap();
    let p = net.theta_star.len();
    let theta_sq = net.theta_star.norm_squared();
    for &(l, ev) in &f.post.evidence {
        let a = j.transpose() * &j / net.noise_variance + DMatrix::identity(p, p) * l;
        let logdet = 2.0 * a.cholesky().unwrap().l().diagonal().map(f64::ln).sum();
        let oracle = 0.5 * p as f64 * l.ln() - 0.5 * l * theta_sq - 0.5 * logdet;
        assert!((ev - oracle).abs() < 1e-8 * oracle.abs().max(1.0), "λ = {l}: {ev} vs {oracle}");
    }
}
