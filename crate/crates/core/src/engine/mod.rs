//! Campaign orchestration: the BO loop and the feedback loop as two
//! threads that communicate only through snapshot stores (and, in live
//! mode, the label queue).
//!
//! In sim mode the loops are coupled at iteration boundaries: after
//! iteration `t` has been evaluated and published, the feedback event for
//! `t` (if one arrives) runs to completion before iteration `t + 1` reads
//! the preference store. Each loop draws from its own random stream, so a
//! run is a pure function of its configuration. In live mode both loops
//! run freely.

mod bo;
mod feedback;
pub mod live;
pub mod output;
pub mod surrogate;
pub mod sweep;

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use bo::{BoLoop, FeatureMap};
pub use feedback::FeedbackLoop;
pub use live::{LabelOutcome, LiveBridge, PendingPair};
pub use output::{read_trace_csv, write_trace_csv, Summary};
pub use sweep::{compare_selectors, parse_seed_range, sweep, SelectorSummary, SweepRun};

use crate::config::{CampaignConfig, ExpertKind, Mode};
use crate::error::{Error, Result};
use crate::preference::PreferencePosterior;
use crate::snapshot::SnapshotStore;
use crate::testbed::problems::FINGERPRINTS;
use crate::testbed::{load_fingerprints, make_expert, make_problem, ExpertOracle, Problem};
use crate::types::{ObservationSet, PreferenceExample, TraceRecord};

/// How often the live feedback loop polls for labels.
pub const LIVE_POLL: Duration = Duration::from_millis(20);

/// Shared, thread-safe view of a campaign.
pub struct CampaignHandle {
    pub config: CampaignConfig,
    /// `D_t`, republished after every evaluation.
    pub observations: SnapshotStore<ObservationSet>,
    /// `p(r | D_pref)`, republished after every retraining.
    pub preferences: SnapshotStore<PreferencePosterior>,
    pub trace: SnapshotStore<Vec<TraceRecord>>,
    /// Present in live mode.
    pub live: Option<LiveBridge>,
    labels: Mutex<Vec<PreferenceExample>>,
    labels_total: AtomicUsize,
    iteration: AtomicUsize,
    started: AtomicBool,
    finished: AtomicBool,
    stop: AtomicBool,
}

/// `GET /api/status` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub iteration: usize,
    pub best_value: Option<f64>,
    pub labels_total: usize,
    pub posterior_version: u64,
    pub mode: Mode,
}

impl CampaignHandle {
    pub fn new(config: CampaignConfig) -> Result<Arc<Self>> {
        config.validate()?;
        let live = (config.mode == Mode::Live).then(LiveBridge::new);
        Ok(Arc::new(Self {
            config,
            observations: SnapshotStore::new(),
            preferences: SnapshotStore::new(),
            trace: SnapshotStore::new(),
            live,
            labels: Mutex::new(Vec::new()),
            labels_total: AtomicUsize::new(0),
            iteration: AtomicUsize::new(0),
            started: AtomicBool::new(false),
            finished: AtomicBool::new(false),
            stop: AtomicBool::new(false),
        }))
    }

    /// `None` until the initial design has been evaluated.
    pub fn status(&self) -> Option<Status> {
        if !self.started.load(Ordering::Acquire) {
            return None;
        }
        let best_value = self
            .observations
            .latest()
            .and_then(|s| s.payload.best().map(|o| o.y));
        Some(Status {
            iteration: self.iteration.load(Ordering::Acquire),
            best_value,
            labels_total: self.labels_total(),
            posterior_version: self.preferences.version(),
            mode: self.config.mode,
        })
    }

    pub fn trace(&self) -> Vec<TraceRecord> {
        self.trace.latest().map(|s| s.payload.clone()).unwrap_or_default()
    }

    pub fn labels(&self) -> Vec<PreferenceExample> {
        self.labels.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn labels_total(&self) -> usize {
        self.labels_total.load(Ordering::Acquire)
    }

    pub fn iteration(&self) -> usize {
        self.iteration.load(Ordering::Acquire)
    }

    pub fn is_started(&self) -> bool {
        self.started.load(Ordering::Acquire)
    }

    pub fn is_finished(&self) -> bool {
        self.finished.load(Ordering::Acquire)
    }

    /// Asks both loops to stop after their current step.
    pub fn stop(&self) {
        self.stop.store(true, Ordering::Release);
    }

    fn stopping(&self) -> bool {
        self.stop.load(Ordering::Acquire)
    }

    fn record_labels(&self, new: &[PreferenceExample]) {
        let mut l = self.labels.lock().unwrap_or_else(|e| e.into_inner());
        l.extend_from_slice(new);
        self.labels_total.store(l.len(), Ordering::Release);
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for `trace.csv`, `summary.json` and `labels.json`.
    pub out_dir: Option<PathBuf>,
    /// Also write every published preference snapshot under
    /// `out_dir/snapshots/`.
    pub persist_snapshots: bool,
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub trace: Vec<TraceRecord>,
    pub summary: Summary,
    pub labels: Vec<PreferenceExample>,
    /// Why the campaign stopped early, if it did. The trace is partial.
    pub aborted: Option<String>,
}

pub fn build_problem(config: &CampaignConfig) -> Result<Arc<Problem>> {
    if config.problem_name == FINGERPRINTS {
        let path = config
            .dataset_path
            .as_ref()
            .ok_or_else(|| Error::config("dataset_path", "required for the fingerprints problem"))?;
        let set = load_fingerprints(path)?;
        if set.bits() != config.dimension {
            return Err(Error::config(
                "dimension",
                format!("dataset has {} bits, config says {}", set.bits(), config.dimension),
            ));
        }
        Ok(Arc::new(Problem::from_fingerprints(Arc::new(set))?))
    } else {
        Ok(Arc::new(make_problem(&config.problem_name)?))
    }
}

fn build_expert(config: &CampaignConfig, problem: &Problem) -> Result<Option<ExpertOracle>> {
    match config.expert_kind {
        ExpertKind::Hint | ExpertKind::Constraint => Ok(Some(make_expert(
            config.expert_kind,
            problem,
            config.constraint_c,
        )?)),
        ExpertKind::None | ExpertKind::Human => Ok(None),
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sim-mode coupling: the BO loop announces a finished iteration and waits
/// for the label count after that iteration's feedback event.
struct Coupling {
    tick: mpsc::Sender<usize>,
    ack: mpsc::Receiver<usize>,
}

fn bo_thread(handle: Arc<CampaignHandle>, mut bo: BoLoop, coupling: Option<Coupling>) -> Option<String> {
    let cfg = handle.config.clone();
    if let Err(e) = bo.initial_design() {
        return Some(format!("initial design failed: {e}"));
    }
    if let Err(e) = handle.observations.publish(bo.observation_set()) {
        return Some(format!("initial design rejected: {e}"));
    }
    handle.started.store(true, Ordering::Release);
    let mut trace = Vec::with_capacity(cfg.horizon);
    let mut aborted = None;
    for t in 1..=cfg.horizon {
        if handle.stopping() {
            break;
        }
        let start = Instant::now();
        let snapshot = handle.preferences.latest();
        let outcome = match bo.iterate(t, snapshot.as_deref()) {
            Ok(o) => o,
            Err(e) => {
                let reason = match e {
                    Error::Aborted { reason, .. } => reason,
                    other => other.to_string(),
                };
                log::error!("campaign aborted at iteration {t}: {reason}");
                aborted = Some(format!("iteration {t}: {reason}"));
                break;
            }
        };
        if let Err(e) = handle.observations.publish(bo.observation_set()) {
            aborted = Some(format!("iteration {t}: {e}"));
            break;
        }
        let wall_ms = start.elapsed().as_millis() as u64;
        let labels_total = match &coupling {
            Some(c) => match c.tick.send(t).ok().and_then(|_| c.ack.recv().ok()) {
                Some(n) => n,
                None => handle.labels_total(),
            },
            None => handle.labels_total(),
        };
        let inc = bo.incumbent();
        trace.push(TraceRecord {
            iteration: t,
            best_value: inc.y,
            incumbent_norm: norm(&inc.x),
            labels_total,
            pref_posterior_version_used: outcome.pref_version.map_or(-1, |v| v as i64),
            // sim traces must replay bit for bit, so no clock readings
            wall_ms: if cfg.mode == Mode::Sim { 0 } else { wall_ms },
        });
        handle.trace.publish(trace.clone()).expect("trace records carry no invariants");
        handle.iteration.store(t, Ordering::Release);
        if cfg.mode == Mode::Live && cfg.iteration_delay_ms > 0 {
            thread::sleep(Duration::from_millis(cfg.iteration_delay_ms));
        }
    }
    handle.finished.store(true, Ordering::Release);
    aborted
}

/// A running campaign.
pub struct Campaign {
    handle: Arc<CampaignHandle>,
    bo: Option<JoinHandle<Option<String>>>,
    feedback: Option<JoinHandle<()>>,
    opts: RunOptions,
    started_at: Instant,
}

impl Campaign {
    /// Starts both loops on `handle` (see [`CampaignHandle::new`]).
    pub fn start(handle: Arc<CampaignHandle>, opts: RunOptions) -> Result<Self> {
        let cfg = handle.config.clone();
        let problem = build_problem(&cfg)?;
        let oracle = build_expert(&cfg, &problem)?;
        let bo = BoLoop::new(cfg.clone(), Arc::clone(&problem))?;
        let features = bo.features.clone();

        let snapshot_dir = match (&opts.out_dir, opts.persist_snapshots) {
            (Some(dir), true) => {
                let d = dir.join("snapshots");
                std::fs::create_dir_all(&d)?;
                Some(d)
            }
            _ => None,
        };
        let started_at = Instant::now();

        let (coupling, feedback) = match cfg.mode {
            Mode::Sim if oracle.is_some() => {
                let (tick_tx, tick_rx) = mpsc::channel::<usize>();
                let (ack_tx, ack_rx) = mpsc::channel::<usize>();
                let mut fl = FeedbackLoop::new(Arc::clone(&handle), oracle, features, snapshot_dir);
                let h = Arc::clone(&handle);
                let jh = thread::Builder::new().name("feedback".into()).spawn(move || {
                    for t in tick_rx {
                        fl.sim_event(t);
                        if ack_tx.send(h.labels_total()).is_err() {
                            break;
                        }
                    }
                })?;
                (
                    Some(Coupling {
                        tick: tick_tx,
                        ack: ack_rx,
                    }),
                    Some(jh),
                )
            }
            Mode::Sim => (None, None),
            Mode::Live => {
                let mut fl = FeedbackLoop::new(Arc::clone(&handle), None, features, snapshot_dir);
                let h = Arc::clone(&handle);
                let jh = thread::Builder::new().name("feedback".into()).spawn(move || loop {
                    let done = h.stopping();
                    fl.live_cycle();
                    if done {
                        break;
                    }
                    thread::sleep(LIVE_POLL);
                })?;
                (None, Some(jh))
            }
        };

        let h = Arc::clone(&handle);
        let bo = thread::Builder::new()
            .name("bo".into())
            .spawn(move || bo_thread(h, bo, coupling))?;
        Ok(Self {
            handle,
            bo: Some(bo),
            feedback,
            opts,
            started_at,
        })
    }

    pub fn handle(&self) -> &Arc<CampaignHandle> {
        &self.handle
    }

    /// Waits for the BO loop to finish, stops the feedback loop and writes
    /// the outputs.
    pub fn wait(mut self) -> Result<CampaignOutcome> {
        let aborted = match self.bo.take().map(JoinHandle::join) {
            Some(Ok(a)) => a,
            Some(Err(_)) => Some("BO thread panicked".to_string()),
            None => None,
        };
        self.handle.stop();
        if let Some(fb) = self.feedback.take() {
            if fb.join().is_err() {
                log::error!("feedback thread panicked; labels gathered so far are kept");
            }
        }
        let runtime_ms = self.started_at.elapsed().as_millis() as u64;
        let trace = self.handle.trace();
        let labels = self.handle.labels();
        let summary = Summary::new(&self.handle, runtime_ms);
        let outcome = CampaignOutcome {
            trace,
            summary,
            labels,
            aborted,
        };
        if let Some(dir) = &self.opts.out_dir {
            output::write_outputs(dir, &outcome)?;
        }
        Ok(outcome)
    }
}

/// Runs a campaign to completion.
pub fn run_campaign(config: &CampaignConfig, opts: &RunOptions) -> Result<CampaignOutcome> {
    let handle = CampaignHandle::new(config.clone())?;
    Campaign::start(handle, opts.clone())?.wait()
}
