//! Deterministic random streams derived from the campaign seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type CampaignRng = ChaCha8Rng;

/// Independent streams of one campaign. Each thread owns its own stream so
/// that the interleaving of the two loops never changes what either draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initial design, candidate pools and surrogate samples.
    Bo = 0,
    /// Feedback arrival, pair generation and selection.
    Feedback = 1,
    /// Preference samples drawn by the BO loop for acquisition.
    PreferenceSample = 2,
    /// Weight initialization of networks.
    Init = 3,
}

pub fn stream(seed: u64, which: Stream) -> CampaignRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
