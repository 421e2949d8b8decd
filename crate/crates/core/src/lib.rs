//! Asynchronous human-in-the-loop Bayesian optimization.
//!
//! A BO loop and a feedback loop run concurrently. The feedback loop fits a
//! Bradley-Terry preference model on pairwise expert labels and publishes
//! versioned posterior snapshots; the BO loop reads the latest snapshot
//! without blocking and adds a preference sample to its Thompson sample of
//! the objective.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision the engine uses.

pub mod acquisition;
pub mod config;
pub mod engine;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod nn;
pub mod optim;
pub mod preference;
pub mod rng;
pub mod scalar;
pub mod selectors;
pub mod snapshot;
pub mod testbed;
pub mod types;

pub use config::{CampaignConfig, ExpertKind, KernelKind, Mode, SelectorKind, SurrogateKind};
pub use engine::{run_campaign, Campaign, CampaignHandle, CampaignOutcome, RunOptions, Status, Summary};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use snapshot::{Snapshot, SnapshotStore, Validate};
pub use types::{LabelSource, Observation, ObservationSet, PreferenceExample, TraceRecord};

pub type GpPosterior = gp::GpPosterior<f64>;
pub type GpPosteriorF32 = gp::GpPosterior<f32>;
pub type LaplacePosterior = nn::laplace::LaplacePosterior<f64>;
pub type LaplacePosteriorF32 = nn::laplace::LaplacePosterior<f32>;
pub type PreferencePosterior = preference::PreferencePosterior<f64>;
pub type PreferencePosteriorF32 = preference::PreferencePosterior<f32>;
