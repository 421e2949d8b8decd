//! Black-box objectives, simulated experts and fingerprint data.

pub mod expert;
pub mod fingerprints;
pub mod problems;

pub use expert::{feedback_arrives, make_expert, ExpertOracle};
pub use fingerprints::{load_fingerprints, FingerprintSet};
pub use problems::{make_problem, Problem};
