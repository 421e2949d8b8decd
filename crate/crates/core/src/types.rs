//! Plain data records exchanged between the two campaign loops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::Validate;

/// One evaluated design point `(x, f(x))`, maximization convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
    pub iteration: usize,
}

impl Observation {
    pub fn check(&self, lb: f64, ub: f64) -> Result<()> {
        if !self.y.is_finite() {
            return Err(Error::Data(format!(
                "observation at iteration {} has non-finite value",
                self.iteration
            )));
        }
        if let Some(v) = self.x.iter().find(|v| !(lb..=ub).contains(*v)) {
            return Err(Error::Data(format!(
                "observation coordinate {v} outside [{lb}, {ub}]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Simulated,
    Human,
}

/// A labeled comparison. `label == 0` means `x0` is preferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceExample {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub label: u8,
    pub source: LabelSource,
    pub created_at_iteration: usize,
}

impl PreferenceExample {
    pub fn new(
        x0: Vec<f64>,
        x1: Vec<f64>,
        label: u8,
        source: LabelSource,
        created_at_iteration: usize,
    ) -> Result<Self> {
        if label > 1 {
            return Err(Error::Data(format!("label must be 0 or 1, got {label}")));
        }
        if x0.len() != x1.len() {
            return Err(Error::Dimension(format!(
                "pair members have lengths {} and {}",
                x0.len(),
                x1.len()
            )));
        }
        if x0 == x1 {
            return Err(Error::Data("pair members are identical".into()));
        }
        Ok(Self {
            x0,
            x1,
            label,
            source,
            created_at_iteration,
        })
    }

    /// Winner first, loser second.
    pub fn ordered(&self) -> (&[f64], &[f64]) {
        if self.label == 0 {
            (&self.x0, &self.x1)
        } else {
            (&self.x1, &self.x0)
        }
    }
}

/// The BO dataset `D_t` as published to the feedback loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub observations: Vec<Observation>,
    pub lb: f64,
    pub ub: f64,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn best(&self) -> Option<&Observation> {
        // first maximum wins
        self.observations
            .iter()
            .fold(None, |acc: Option<&Observation>, o| match acc {
                Some(b) if b.y >= o.y => Some(b),
                _ => Some(o),
            })
    }
}

impl Validate for ObservationSet {
    fn validate(&self) -> Result<()> {
        self.observations
            .iter()
            .try_for_each(|o| o.check(self.lb, self.ub))
    }
}

/// Per-iteration metrics row. `pref_posterior_version_used` is `-1` when
/// no preference model had been published yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub best_value: f64,
    pub incumbent_norm: f64,
    pub labels_total: usize,
    pub pref_posterior_version_used: i64,
    pub wall_ms: u64,
}
