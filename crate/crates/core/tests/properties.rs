use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hitlbo::gp::{fit_gp, gp_predict, gp_thompson_sample, GpFitOptions, Kernel, KernelParams};
use hitlbo::nn::{Mlp, MlpArchitecture};
use hitlbo::preference::bt_likelihood;
use hitlbo::{KernelKind, Observation, ObservationSet, SnapshotStore};

fn observations(valid: bool, n: usize) -> ObservationSet {
    let observations = (0..n)
        .map(|i| Observation {
            x: vec![if valid { 0.5 } else { 7.0 }],
            y: i as f64,
            iteration: i,
        })
        .collect();
    ObservationSet { observations, lb: 0.0, ub: 1.0 }
}

fn gp_data(seed: u64, n: usize, d: usize) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y = DVector::from_fn(n, |i, _| (0..d).map(|j| (w[j] * x[(i, j)]).sin()).sum::<f64>());
    let pool = DMatrix::from_fn(6, d, |_, _| rng.random_range(-1.0..1.0));
    (x, y, pool)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn versions_count_up_without_gaps(valid in prop::collection::vec(any::<bool>(), 0..40)) {
        let store = SnapshotStore::new();
        let mut expected = 0;
        for v in valid {
            match store.publish(observations(v, 2)) {
                Ok(version) => {
                    prop_assert!(v);
                    expected += 1;
                    prop_assert_eq!(version, expected);
                }
                Err(_) => prop_assert!(!v),
            }
            prop_assert_eq!(store.version(), expected);
            if let Some(s) = store.latest() {
                prop_assert_eq!(s.version, expected);
            }
        }
    }

    #[test]
    fn gp_prediction_and_sampling_are_deterministic(seed in 0u64..500, n in 3usize..12, d in 1usize..4) {
        let (x, y, pool) = gp_data(seed, n, d);
        let post = fit_gp(&x, &y, KernelKind::Matern52, &GpFitOptions::default()).unwrap().posterior;
        let (m1, c1) = gp_predict(&post, &pool);
        let (m2, c2) = gp_predict(&post, &pool);
        prop_assert_eq!(m1, m2);
        prop_assert_eq!(c1, c2);
        let a = gp_thompson_sample(&post, &pool, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = gp_thompson_sample(&post, &pool, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn target_shift_moves_only_the_mean(seed in 0u64..500, n in 3usize..12, b in -50.0f64..50.0) {
        let (x, y, pool) = gp_data(seed, n, 2);
        let opts = GpFitOptions::default();
        let post = fit_gp(&x, &y, KernelKind::Matern52, &opts).unwrap().posterior;
        let shifted = fit_gp(&x, &y.add_scalar(b), KernelKind::Matern52, &opts).unwrap().posterior;
        let (m, c) = gp_predict(&post, &pool);
        let (ms, cs) = gp_predict(&shifted, &pool);
        let scale = 1.0 + b.abs() + m.amax();
        for i in 0..pool.nrows() {
            prop_assert!((ms[i] - m[i] - b).abs() < 1e-9 * scale, "mean {}: {} vs {}", i, ms[i], m[i] + b);
        }
        prop_assert!((&cs - &c).amax() < 1e-9 * (1.0 + c.amax()));
    }

    #[test]
    fn variance_at_training_inputs_is_below_noise(seed in 0u64..500, n in 3usize..12, d in 1usize..4) {
        let (x, y, _) = gp_data(seed, n, d);
        let post = fit_gp(&x, &y, KernelKind::Matern52, &GpFitOptions::default()).unwrap().posterior;
        let (_, c) = gp_predict(&post, &x);
        // the noise variance is fitted on standardized targets
        let noise = post.params.noise_variance() * post.target_std * post.target_std;
        for i in 0..n {
            prop_assert!(c[(i, i)] <= noise + 1e-6, "point {}: {} > {}", i, c[(i, i)], noise);
        }
    }

    #[test]
    fn gram_matrices_are_psd(seed in 0u64..500, n in 2usize..40, d in 1usize..12, tanimoto in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = if tanimoto { KernelKind::Tanimoto } else { KernelKind::Matern52 };
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| if tanimoto { f64::from(rng.random_bool(0.4) as u8) } else { rng.random_range(-2.0..2.0) }).collect())
            .collect();
        let mut params = KernelParams::<f64>::initial(kind, d);
        if !tanimoto {
            params.log_lengthscales = DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.0));
        }
        let g = Kernel::new(kind, params).gram(&x);
        let min = SymmetricEigen::new(g).eigenvalues.min();
        prop_assert!(min >= -1e-8, "min eigenvalue {}", min);
    }

    #[test]
    fn bt_shift_is_exact_on_dyadic_scores(a in -64i32..64, b in -64i32..64, c in -64i32..64, label in 0u8..2) {
        let (r0, r1, s) = (a as f64 / 8.0, b as f64 / 8.0, c as f64 / 8.0);
        prop_assert_eq!(bt_likelihood(r0 + s, r1 + s, label), bt_likelihood(r0, r1, label));
    }

    #[test]
    fn map_preferences_are_antisymmetric(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = MlpArchitecture::new(3, vec![8, 8]);
        let psi: DVector<f64> = arch.init(&mut rng);
        let mlp = Mlp::new(&arch, &psi).unwrap();
        for _ in 0..10 {
            let x0: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x1: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (r0, r1) = (mlp.forward_one(&x0).unwrap(), mlp.forward_one(&x1).unwrap());
            let sum = bt_likelihood(r0, r1, 0) + bt_likelihood(r1, r0, 0);
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
