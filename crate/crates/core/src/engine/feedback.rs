//! The feedback loop: gather labels, retrain the preference model, publish.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DVector;

use super::bo::FeatureMap;
use super::CampaignHandle;
use crate::error::Result;
use crate::nn::MlpArchitecture;
use crate::preference::{fit_laplace_preference, train_preference, write_snapshot, PairData, PreferenceOptions};
use crate::rng::{stream, CampaignRng, Stream};
use crate::selectors::{generate_candidate_pairs, select_pairs, DEFAULT_M_CAND};
use crate::testbed::{feedback_arrives, ExpertOracle};
use crate::types::{LabelSource, ObservationSet, PreferenceExample};

pub(crate) struct Proposal {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub f0: f64,
    pub f1: f64,
    pub score: f64,
}

pub struct FeedbackLoop {
    handle: Arc<CampaignHandle>,
    oracle: Option<ExpertOracle>,
    features: FeatureMap,
    arch: MlpArchitecture,
    rng: CampaignRng,
    labels: Vec<PreferenceExample>,
    psi: Option<DVector<f64>>,
    snapshot_dir: Option<PathBuf>,
}

impl FeedbackLoop {
    pub fn new(
        handle: Arc<CampaignHandle>,
        oracle: Option<ExpertOracle>,
        features: FeatureMap,
        snapshot_dir: Option<PathBuf>,
    ) -> Self {
        let cfg = &handle.config;
        Self {
            arch: MlpArchitecture::standard(cfg.dimension),
            rng: stream(cfg.seed, Stream::Feedback),
            handle,
            oracle,
            features,
            labels: Vec::new(),
            psi: None,
            snapshot_dir,
        }
    }

    pub fn labels(&self) -> &[PreferenceExample] {
        &self.labels
    }

    /// Top-k pairs from `D_t` under the configured selector, in
    /// presentation order.
    pub(crate) fn propose(&mut self, data: &ObservationSet, k: usize) -> Result<Vec<Proposal>> {
        let obs = &data.observations;
        let pairs = generate_candidate_pairs(obs.len(), DEFAULT_M_CAND, &mut self.rng)?;
        let d = obs[0].x.len();
        let pts = self.features.matrix(obs.iter().map(|o| o.x.as_slice()), d);
        let latest = self.handle.preferences.latest();
        let cfg = &self.handle.config;
        let sel = select_pairs(cfg.selector, &pairs, &pts, latest.as_deref().map(|s| &s.payload), k, &mut self.rng)?;
        if sel.fell_back {
            log::info!("no preference model yet; {} fell back to random pairs", cfg.selector);
        }
        Ok(sel
            .pairs
            .iter()
            .map(|p| {
                let (a, b) = p.presentation(&mut self.rng);
                Proposal {
                    x0: obs[a].x.clone(),
                    x1: obs[b].x.clone(),
                    f0: obs[a].y,
                    f1: obs[b].y,
                    score: p.beta_score,
                }
            })
            .collect())
    }

    fn add_labels(&mut self, new: Vec<PreferenceExample>) {
        self.handle.record_labels(&new);
        self.labels.extend(new);
    }

    /// Retrains on all labels and publishes. Failures are logged and the
    /// previous snapshot stays in place.
    pub fn retrain(&mut self) -> Option<u64> {
        match self.try_retrain() {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("preference update skipped ({} labels): {e}", self.labels.len());
                None
            }
        }
    }

    fn try_retrain(&mut self) -> Result<u64> {
        let features = &self.features;
        let data = PairData::from_examples(&self.labels, |x| features.apply(x))?;
        let opts = PreferenceOptions {
            prior_precision: self.handle.config.pref_prior_precision,
            init: self.psi.clone(),
            ..Default::default()
        };
        let net = train_preference(&data, &self.arch, &opts, &mut self.rng)?;
        let post = fit_laplace_preference(net, &data)?;
        let psi = post.psi_star.clone();
        let version = self.handle.preferences.publish(post)?;
        self.psi = Some(psi);
        if let (Some(dir), Some(snap)) = (&self.snapshot_dir, self.handle.preferences.latest()) {
            let file = std::fs::File::create(dir.join(format!("pref_v{version}.bin")))?;
            write_snapshot(std::io::BufWriter::new(file), snap.version, &snap.payload)?;
        }
        Ok(version)
    }

    /// Sim-mode event for iteration `t`: with probability `p_fb`, label `k`
    /// selected pairs with the simulated expert and retrain.
    pub fn sim_event(&mut self, t: usize) {
        let Some(oracle) = self.oracle.clone() else {
            return;
        };
        if !feedback_arrives(&mut self.rng, self.handle.config.p_fb) {
            return;
        }
        let Some(data) = self.handle.observations.latest() else {
            return;
        };
        if data.len() < 2 {
            return;
        }
        let proposals = match self.propose(&data.payload, self.handle.config.pairs_per_event) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("pair selection failed at iteration {t}: {e}");
                return;
            }
        };
        let new: Vec<PreferenceExample> = proposals
            .into_iter()
            .filter(|p| p.x0 != p.x1)
            .map(|p| {
                let label = oracle.label(&p.x0, &p.x1);
                PreferenceExample {
                    x0: p.x0,
                    x1: p.x1,
                    label,
                    source: LabelSource::Simulated,
                    created_at_iteration: t,
                }
            })
            .collect();
        if new.is_empty() {
            return;
        }
        self.add_labels(new);
        self.retrain();
    }

    /// One live-mode cycle: absorb human labels, retrain if any arrived,
    /// and top the pending queue back up to `k` pairs.
    pub fn live_cycle(&mut self) {
        let Some(bridge) = self.handle.live.as_ref() else {
            return;
        };
        let new = bridge.drain();
        if !new.is_empty() {
            self.add_labels(new);
            self.retrain();
        }
        let k = self.handle.config.pairs_per_event;
        let bridge = self.handle.live.as_ref().expect("checked above");
        let missing = k.saturating_sub(bridge.pending_len());
        if missing == 0 {
            return;
        }
        let Some(data) = self.handle.observations.latest() else {
            return;
        };
        if data.len() < 2 {
            return;
        }
        match self.propose(&data.payload, missing) {
            Ok(props) => {
                let bridge = self.handle.live.as_ref().expect("checked above");
                for p in props {
                    bridge.offer(p.x0, p.x1, Some(p.f0), Some(p.f1), p.score);
                }
            }
            Err(e) => log::warn!("pair selection failed: {e}"),
        }
    }
}
