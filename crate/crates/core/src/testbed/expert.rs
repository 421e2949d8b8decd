//! Simulated experts: a hidden score `s` turned into pairwise labels.

use rand::Rng;

use crate::config::ExpertKind;
use crate::error::{Error, Result};
use crate::testbed::problems::Problem;

#[derive(Debug, Clone, PartialEq)]
pub enum ExpertOracle {
    /// `s(x) = −‖x − x*‖²`: the expert knows roughly where the optimum is.
    Hint { optimizer: Vec<f64> },
    /// `s(x) = −(‖x‖ − c)²`: the expert wants solutions of norm `c`.
    Constraint { radius: f64 },
}

pub fn make_expert(kind: ExpertKind, problem: &Problem, c: Option<f64>) -> Result<ExpertOracle> {
    match kind {
        ExpertKind::Hint => {
            let optimizer = problem.known_optimizer.clone().ok_or_else(|| {
                Error::Data(format!("hint expert needs a known optimizer; {} has none", problem.name))
            })?;
            Ok(ExpertOracle::Hint { optimizer })
        }
        ExpertKind::Constraint => {
            let radius = c.ok_or_else(|| Error::config("constraint_c", "constraint expert needs a radius"))?;
            if !(radius.is_finite() && radius >= 0.0) {
                return Err(Error::config("constraint_c", "must be non-negative"));
            }
            Ok(ExpertOracle::Constraint { radius })
        }
        other => Err(Error::Data(format!("`{other}` is not a simulated expert"))),
    }
}

impl ExpertOracle {
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            ExpertOracle::Hint { optimizer } => -x
                .iter()
                .zip(optimizer)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>(),
            ExpertOracle::Constraint { radius } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                -(norm - radius).powi(2)
            }
        }
    }

    /// 0 iff `s(x0) > s(x1)`; ties go to 1.
    pub fn label(&self, x0: &[f64], x1: &[f64]) -> u8 {
        if self.score(x0) > self.score(x1) {
            0
        } else {
            1
        }
    }

    pub fn kind(&self) -> ExpertKind {
        match self {
            ExpertOracle::Hint { .. } => ExpertKind::Hint,
            ExpertOracle::Constraint { .. } => ExpertKind::Constraint,
        }
    }
}

/// Bernoulli(`p_fb`) draw deciding whether a feedback event happens.
pub fn feedback_arrives<R: Rng + ?Sized>(rng: &mut R, p_fb: f64) -> bool {
    rng.random_bool(p_fb.clamp(0.0, 1.0))
}
