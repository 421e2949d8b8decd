use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hitlbo::engine::write_trace_csv;
use hitlbo::testbed::fingerprints::synthetic_fingerprints;
use hitlbo::{
    run_campaign, Campaign, CampaignConfig, CampaignHandle, CampaignOutcome, ExpertKind, LabelSource, Mode, RunOptions,
    SurrogateKind,
};

fn small(problem: &str, seed: u64) -> CampaignConfig {
    let mut c = CampaignConfig::for_problem(problem).unwrap();
    c.seed = seed;
    c.horizon = 8;
    c.pool_size = 128;
    c
}

fn csv_bytes(outcome: &CampaignOutcome) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &outcome.trace).unwrap();
    buf
}

fn run(config: &CampaignConfig) -> CampaignOutcome {
    let outcome = run_campaign(config, &RunOptions::default()).unwrap();
    assert!(outcome.aborted.is_none(), "{:?}", outcome.aborted);
    outcome
}

/// Runs a campaign and returns it with its final observation count.
fn run_with_handle(config: &CampaignConfig) -> (CampaignOutcome, Arc<CampaignHandle>) {
    let handle = CampaignHandle::new(config.clone()).unwrap();
    let outcome = Campaign::start(handle.clone(), RunOptions::default()).unwrap().wait().unwrap();
    (outcome, handle)
}

#[test]
fn identical_seeds_give_identical_trace_bytes() {
    let mut c = small("ackley10", 3);
    c.p_fb = 0.5;
    let a = run(&c);
    let b = run(&c);
    assert_eq!(csv_bytes(&a), csv_bytes(&b));
    assert_eq!(a.labels, b.labels);
    assert!(a.trace.iter().any(|r| r.pref_posterior_version_used > 0));
}

#[test]
fn disabled_feedback_reproduces_plain_bo() {
    let mut none = small("levy10", 4);
    none.expert_kind = ExpertKind::None;
    let mut gamma0 = small("levy10", 4);
    gamma0.gamma0 = 0.0;
    gamma0.p_fb = 0.5;
    let (a, ha) = run_with_handle(&none);
    let (b, hb) = run_with_handle(&gamma0);
    assert_eq!(a.labels.len(), 0);
    assert!(!b.labels.is_empty());
    assert_eq!(ha.observations.latest().unwrap().observations, hb.observations.latest().unwrap().observations);
    for (x, y) in a.trace.iter().zip(&b.trace) {
        assert_eq!(x.best_value.to_bits(), y.best_value.to_bits());
        assert_eq!(x.incumbent_norm.to_bits(), y.incumbent_norm.to_bits());
    }
    assert!(a.trace.iter().all(|r| r.pref_posterior_version_used == -1));
}

#[test]
fn single_iteration_campaign() {
    let mut c = small("ackley10", 5);
    c.horizon = 1;
    c.p_fb = 1.0;
    let (out, handle) = run_with_handle(&c);
    assert_eq!(out.trace.len(), 1);
    let obs = handle.observations.latest().unwrap();
    assert_eq!(obs.len(), c.n_init + 1);
    let best = obs.observations.iter().map(|o| o.y).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.trace[0].best_value, best);
    // the only feedback event follows the only acquisition
    assert_eq!(out.trace[0].pref_posterior_version_used, -1);
}

#[test]
fn first_acquisition_ignores_the_expert() {
    let mut with = small("ackley10", 6);
    with.horizon = 2;
    with.p_fb = 1.0;
    let mut without = with.clone();
    without.gamma0 = 0.0;
    let (_, a) = run_with_handle(&with);
    let (_, b) = run_with_handle(&without);
    let n = with.n_init;
    assert_eq!(a.observations.latest().unwrap().observations[..=n], b.observations.latest().unwrap().observations[..=n]);
}

#[test]
fn no_feedback_means_no_labels() {
    let mut c = small("ackley10", 7);
    c.p_fb = 0.0;
    let out = run(&c);
    assert_eq!(out.summary.labels_total, 0);
    assert_eq!(out.summary.versions_published, 0);
    assert!(out.trace.iter().all(|r| r.labels_total == 0 && r.pref_posterior_version_used == -1));
}

#[test]
fn certain_feedback_counts() {
    let mut c = small("ackley10", 8);
    c.horizon = 10;
    c.p_fb = 1.0;
    let out = run(&c);
    assert_eq!(out.summary.labels_total, 30);
    assert_eq!(out.summary.versions_published, 10);
    assert_eq!(out.labels.len(), 30);
    assert!(out.labels.iter().all(|l| l.source == LabelSource::Simulated));
    for (i, r) in out.trace.iter().enumerate() {
        assert_eq!(r.labels_total, 3 * (i + 1));
        // iteration t reads the snapshot published after iteration t − 1
        assert_eq!(r.pref_posterior_version_used, i as i64 - if i == 0 { 1 } else { 0 });
    }
}

#[test]
fn label_volume_is_binomial() {
    let counts: Vec<usize> = (0..20)
        .map(|seed| {
            let mut c = small("ackley10", seed);
            c.horizon = 100;
            c.pool_size = 16;
            c.gamma0 = 0.0;
            run(&c).summary.labels_total
        })
        .collect();
    let mean = counts.iter().sum::<usize>() as f64 / 20.0;
    assert!((mean - 30.0).abs() <= 10.0, "mean labels {mean} from {counts:?}");
    assert!(counts.iter().all(|n| n % 3 == 0));
}

#[test]
fn summary_and_trace_agree() {
    let mut c = small("levy10", 9);
    c.expert_kind = ExpertKind::Constraint;
    c.p_fb = 0.5;
    let (out, handle) = run_with_handle(&c);
    assert_eq!(out.summary.labels_total, out.trace.last().unwrap().labels_total);
    assert_eq!(out.summary.labels_total, out.labels.len());
    assert_eq!(out.summary.best_value, out.trace.last().unwrap().best_value);
    assert!(out.trace.windows(2).all(|w| w[1].best_value >= w[0].best_value));
    assert_eq!(handle.observations.latest().unwrap().len(), c.n_init + c.horizon);
    let versions: Vec<i64> = out.trace.iter().map(|r| r.pref_posterior_version_used).collect();
    assert!(versions.iter().all(|&v| v == -1 || (1..=out.summary.versions_published as i64).contains(&v)));
    assert!(versions.windows(2).all(|w| w[1] >= w[0]));
}

fn fingerprint_config(dir: &std::path::Path, rows: usize, bits: usize) -> CampaignConfig {
    let set = synthetic_fingerprints(rows, bits, 0.2, &mut ChaCha8Rng::seed_from_u64(10));
    let path = dir.join("fps.csv");
    set.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    let mut c = CampaignConfig::for_problem("fingerprints").unwrap();
    c.dimension = bits;
    c.dataset_path = Some(path);
    c.horizon = 6;
    c
}

#[test]
fn fingerprint_campaign_runs_on_the_tanimoto_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = fingerprint_config(dir.path(), 200, 64);
    c.p_fb = 1.0;
    let (out, handle) = run_with_handle(&c);
    assert!(out.aborted.is_none(), "{:?}", out.aborted);
    assert_eq!(out.trace.len(), 6);
    assert_eq!(out.summary.labels_total, 18);
    let obs = handle.observations.latest().unwrap();
    let mut xs: Vec<&Vec<f64>> = obs.observations.iter().map(|o| &o.x).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    assert_eq!(xs.len(), obs.len(), "a molecule was evaluated twice");
    assert!(obs.observations.iter().all(|o| o.y.is_finite()));
}

#[test]
fn exhausted_dataset_aborts_with_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = fingerprint_config(dir.path(), 12, 16);
    c.expert_kind = ExpertKind::None;
    let out_dir = dir.path().join("out");
    let outcome = run_campaign(
        &c,
        &RunOptions {
            out_dir: Some(out_dir.clone()),
            persist_snapshots: false,
        },
    )
    .unwrap();
    let reason = outcome.aborted.expect("campaign should abort");
    assert!(reason.contains("iteration 3"), "{reason}");
    assert_eq!(outcome.trace.len(), 2);
    let text = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn laplace_surrogate_campaign() {
    let mut c = small("ackley10", 11);
    c.surrogate_kind = SurrogateKind::LaplaceMlp;
    c.horizon = 3;
    c.p_fb = 1.0;
    let out = run(&c);
    assert_eq!(out.trace.len(), 3);
    assert_eq!(out.summary.labels_total, 9);
}

/// Final best value of the seed-0 ackley10 GP run with default settings,
/// recorded when the fixture was first run.
const ACKLEY_FIXTURE_FINAL: f64 = -20.711737576539615;

#[test]
fn seeded_ackley_run_improves() {
    let c = CampaignConfig::for_problem("ackley10").unwrap();
    let (out, handle) = run_with_handle(&c);
    assert!(out.aborted.is_none());
    let obs = handle.observations.latest().unwrap();
    let initial = obs.observations[..c.n_init].iter().map(|o| o.y).fold(f64::NEG_INFINITY, f64::max);
    let best: Vec<f64> = out.trace.iter().map(|r| r.best_value).collect();
    assert!(best.windows(2).all(|w| w[1] >= w[0]));
    let last = *best.last().unwrap();
    println!("initial {initial}, final {last}");
    assert!(last > initial);
    assert!((last - ACKLEY_FIXTURE_FINAL).abs() < 1e-9, "fixture moved: {last}");
}

fn median(mut v: Vec<u64>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

fn wait(d: Duration) {
    let start = Instant::now();
    while start.elapsed() < d {
        std::thread::sleep(Duration::from_millis(20));
    }
}

#[test]
fn live_iterations_do_not_wait_for_training() {
    let mut c = CampaignConfig::for_problem("ackley10").unwrap();
    c.mode = Mode::Live;
    c.expert_kind = ExpertKind::Human;
    c.horizon = 100_000;
    c.pool_size = 256;
    c.iteration_delay_ms = 10;
    let handle = CampaignHandle::new(c).unwrap();
    let campaign = Campaign::start(handle.clone(), RunOptions::default()).unwrap();
    let live = handle.live.as_ref().unwrap();
    let phase = Duration::from_secs(3);

    wait(Duration::from_secs(1));
    let a0 = handle.iteration();
    wait(phase);
    let a1 = handle.iteration();
    // label everything offered so the feedback loop keeps retraining
    let start = Instant::now();
    let mut labeled = 0;
    while start.elapsed() < phase {
        for p in live.pending(100) {
            if matches!(live.submit(&p.pair_id, (labeled % 2) as u8, handle.iteration()), hitlbo::engine::LabelOutcome::Accepted) {
                labeled += 1;
            }
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let b1 = handle.iteration();
    // let the last retrain finish before the second quiet phase
    let mut settled = handle.preferences.version();
    loop {
        wait(Duration::from_millis(500));
        let v = handle.preferences.version();
        if v == settled {
            break;
        }
        settled = v;
    }
    let c0 = handle.iteration();
    wait(phase);
    let c1 = handle.iteration();
    let versions = handle.preferences.version();
    handle.stop();
    let out = campaign.wait().unwrap();

    let ms = |from: usize, to: usize| median(out.trace[from..to].iter().map(|r| r.wall_ms).collect());
    let (before, busy, after) = (ms(a0, a1), ms(a1, b1), ms(c0, c1));
    let quiet = (before + after) / 2.0;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    // two compute-bound threads on fewer than two cores share the CPU
    let share = (2.0 / cores as f64).max(1.0);
    println!(
        "median wall ms: quiet {before} / {after}, busy {busy} ({} iterations), {labeled} labels, {versions} versions, {cores} cores",
        b1 - a1
    );
    assert!(labeled > 0 && versions >= 2);
    assert!(b1 > a1, "no iteration completed while training");
    assert!(busy < 2.0 * share * quiet.max(1.0), "quiet {quiet} ms, busy {busy} ms");
}
