//! Standard synthetic test functions, negated so that larger is better.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::testbed::fingerprints::FingerprintSet;

pub const ACKLEY10: &str = "ackley10";
pub const LEVY10: &str = "levy10";
pub const RASTRIGIN10: &str = "rastrigin10";
pub const HARTMANN6: &str = "hartmann6";
pub const FINGERPRINTS: &str = "fingerprints";

/// Maximum of the negated Hartmann-6 function, from a 200-start bounded
/// quasi-Newton search over `[0, 1]^6`.
pub const HARTMANN6_MAX: f64 = 3.322368011415514;

const HARTMANN6_ARGMAX: [f64; 6] = [
    0.20168950725118004,
    0.15001068938946577,
    0.47687397427549577,
    0.27533242839179606,
    0.31165161679481873,
    0.6573005288140765,
];

/// `(d, lb, ub)` of the named standard problem.
pub fn standard_domain(name: &str) -> Option<(usize, f64, f64)> {
    match name {
        ACKLEY10 => Some((10, -32.768, 32.768)),
        LEVY10 => Some((10, -10.0, 10.0)),
        RASTRIGIN10 => Some((10, -5.12, 5.12)),
        HARTMANN6 => Some((6, 0.0, 1.0)),
        _ => None,
    }
}

/// Norm radius of the constraint expert where one is established.
pub fn default_constraint_radius(name: &str) -> Option<f64> {
    match name {
        ACKLEY10 => Some(100.0),
        LEVY10 => Some(22.0),
        _ => None,
    }
}

#[derive(Debug, Clone)]
enum Objective {
    Ackley,
    Levy,
    Rastrigin,
    Hartmann6,
    Dataset(Arc<FingerprintSet>),
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub d: usize,
    pub lb: f64,
    pub ub: f64,
    pub known_optimum_value: Option<f64>,
    pub known_optimizer: Option<Vec<f64>>,
    objective: Objective,
}

pub fn make_problem(name: &str) -> Result<Problem> {
    let (d, lb, ub) = standard_domain(name).ok_or_else(|| Error::UnknownProblem(name.to_string()))?;
    let (objective, optimizer) = match name {
        ACKLEY10 => (Objective::Ackley, vec![0.0; d]),
        LEVY10 => (Objective::Levy, vec![1.0; d]),
        RASTRIGIN10 => (Objective::Rastrigin, vec![0.0; d]),
        _ => (Objective::Hartmann6, HARTMANN6_ARGMAX.to_vec()),
    };
    let optimum = if name == HARTMANN6 { HARTMANN6_MAX } else { 0.0 };
    Ok(Problem {
        name: name.to_string(),
        d,
        lb,
        ub,
        known_optimum_value: Some(optimum),
        known_optimizer: Some(optimizer),
        objective,
    })
}

impl Problem {
    /// Wraps a labeled fingerprint set. The value column is minimized (as
    /// docking scores are), so `evaluate` returns its negation.
    pub fn from_fingerprints(set: Arc<FingerprintSet>) -> Result<Self> {
        let values = set
            .values
            .as_ref()
            .ok_or_else(|| Error::Data("fingerprint set has no value column".into()))?;
        let best = (0..values.len())
            .fold(None, |acc: Option<usize>, i| match acc {
                Some(b) if values[b] <= values[i] => Some(b),
                _ => Some(i),
            })
            .ok_or_else(|| Error::Data("fingerprint set is empty".into()))?;
        Ok(Self {
            name: FINGERPRINTS.to_string(),
            d: set.bits(),
            lb: 0.0,
            ub: 1.0,
            known_optimum_value: Some(-values[best]),
            known_optimizer: Some(set.row(best)),
            objective: Objective::Dataset(set),
        })
    }

    /// Objective value (larger is better). Dataset problems return NaN for
    /// vectors that are not rows of the set.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Ackley => -ackley(x),
            Objective::Levy => -levy(x),
            Objective::Rastrigin => -rastrigin(x),
            Objective::Hartmann6 => -hartmann6(x),
            Objective::Dataset(set) => set
                .index_of(x)
                .and_then(|i| set.values.as_ref().map(|v| -v[i]))
                .unwrap_or(f64::NAN),
        }
    }

    pub fn fingerprints(&self) -> Option<&Arc<FingerprintSet>> {
        match &self.objective {
            Objective::Dataset(set) => Some(set),
            _ => None,
        }
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        let w = self.ub - self.lb;
        x.iter().map(|v| (v - self.lb) / w).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        let w = self.ub - self.lb;
        u.iter()
            .map(|v| (self.lb + v * w).clamp(self.lb, self.ub))
            .collect()
    }
}

/// Ackley with `a = 20, b = 0.2, c = 2π` (minimization form).
pub fn ackley<T: Scalar>(x: &[T]) -> T {
    let n = T::lit(x.len() as f64);
    let a = T::lit(20.0);
    let sq = x.iter().fold(T::zero(), |s, &v| s + v * v) / n;
    let cs = x
        .iter()
        .fold(T::zero(), |s, &v| s + (T::two_pi() * v).cos())
        / n;
    // grouped so the origin evaluates to exactly zero
    a * (T::one() - (T::lit(-0.2) * sq.sqrt()).exp()) + (T::E() - cs.exp())
}

/// Lévy function (minimization form).
pub fn levy<T: Scalar>(x: &[T]) -> T {
    let pi = T::pi();
    let quarter = T::lit(0.25);
    let w: Vec<T> = x.iter().map(|&v| T::one() + (v - T::one()) * quarter).collect();
    let d = w.len();
    let s1 = (pi * w[0]).sin();
    let mut total = s1 * s1;
    for &wi in &w[..d - 1] {
        let s = (pi * wi + T::one()).sin();
        total += (wi - T::one()).powi(2) * (T::one() + T::lit(10.0) * s * s);
    }
    let wd = w[d - 1];
    let s = (T::two_pi() * wd).sin();
    total + (wd - T::one()).powi(2) * (T::one() + s * s)
}

/// Rastrigin function (minimization form).
pub fn rastrigin<T: Scalar>(x: &[T]) -> T {
    let ten = T::lit(10.0);
    x.iter().fold(ten * T::lit(x.len() as f64), |s, &v| {
        s + v * v - ten * (T::two_pi() * v).cos()
    })
}

const H6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const H6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const H6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// Six-dimensional Hartmann function (minimization form, minimum ≈ −3.32237).
pub fn hartmann6<T: Scalar>(x: &[T]) -> T {
    let mut total = T::zero();
    for i in 0..4 {
        let mut inner = T::zero();
        for j in 0..6 {
            let diff = x[j] - T::lit(H6_P[i][j]);
            inner += T::lit(H6_A[i][j]) * diff * diff;
        }
        total += T::lit(H6_ALPHA[i]) * (-inner).exp();
    }
    -total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ackley_origin_is_zero() {
        let p = make_problem(ACKLEY10).unwrap();
        assert_eq!(p.evaluate(&[0.0; 10]), 0.0);
        assert_eq!(ackley(&[0.0f32; 10]), 0.0);
    }

    #[test]
    fn levy_ones_is_zero() {
        let p = make_problem(LEVY10).unwrap();
        assert!(p.evaluate(&[1.0; 10]).abs() < 1e-12);
    }

    #[test]
    fn rastrigin_origin_is_zero() {
        assert_eq!(make_problem(RASTRIGIN10).unwrap().evaluate(&[0.0; 10]), 0.0);
    }

    #[test]
    fn hartmann_fixture() {
        let p = make_problem(HARTMANN6).unwrap();
        let x = p.known_optimizer.clone().unwrap();
        assert!((p.evaluate(&x) - HARTMANN6_MAX).abs() < 1e-9);
        assert!((HARTMANN6_MAX - 3.32237).abs() < 1e-5);
    }

    // independent oracle: multi-start coordinate pattern search over [0,1]^6
    #[test]
    fn hartmann_multistart_oracle_agrees_with_fixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = |x: &[f64]| -hartmann6(x);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..20 {
            let mut x: Vec<f64> = (0..6).map(|_| rng.random()).collect();
            let mut fx = f(&x);
            let mut step = 0.25;
            while step > 1e-10 {
                let mut improved = false;
                for j in 0..6 {
                    for dir in [-1.0, 1.0] {
                        let mut y = x.clone();
                        y[j] = (y[j] + dir * step).clamp(0.0, 1.0);
                        let fy = f(&y);
                        if fy > fx {
                            x = y;
                            fx = fy;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best = best.max(fx);
        }
        assert!((best - HARTMANN6_MAX).abs() < 1e-7, "{best}");
    }

    #[test]
    fn known_optimizers_beat_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in [ACKLEY10, LEVY10, RASTRIGIN10, HARTMANN6] {
            let p = make_problem(name).unwrap();
            let best = p.evaluate(p.known_optimizer.as_ref().unwrap());
            assert_eq!(Some(best).map(|b| (b - p.known_optimum_value.unwrap()).abs() < 1e-9), Some(true));
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..p.d).map(|_| rng.random_range(p.lb..=p.ub)).collect();
                let v = p.evaluate(&x);
                assert!(v.is_finite());
                assert!(best >= v, "{name}: {v} beats optimum {best}");
            }
        }
    }

    #[test]
    fn unknown_problem() {
        assert!(matches!(make_problem("sphere3"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn unit_map_round_trip() {
        let p = make_problem(LEVY10).unwrap();
        let x = vec![-10.0, 0.0, 10.0, 2.5, -3.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let back = p.from_unit(&p.to_unit(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
