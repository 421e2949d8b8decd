//! Multi-seed, multi-selector sweeps.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run_campaign, RunOptions};
use crate::config::{CampaignConfig, SelectorKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub selector: SelectorKind,
    pub seed: u64,
    pub final_best_value: f64,
    pub labels_total: usize,
    pub versions_published: u64,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorSummary {
    pub selector: SelectorKind,
    pub n_seeds: usize,
    pub mean_final_best: f64,
    pub std_final_best: f64,
    pub mean_labels: f64,
}

/// Parses `A..B` (half-open) or `A..=B` (inclusive).
pub fn parse_seed_range(text: &str) -> Result<Range<u64>> {
    let bad = || Error::config("seeds", format!("`{text}` is not a range like 0..10 or 0..=9"));
    let (a, b, inclusive) = if let Some((a, b)) = text.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = text.split_once("..") {
        (a, b, false)
    } else {
        return Err(bad());
    };
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    let end = if inclusive { b.checked_add(1).ok_or_else(bad)? } else { b };
    if end <= a {
        return Err(Error::config("seeds", format!("`{text}` is empty")));
    }
    Ok(a..end)
}

/// Runs every (selector, seed) combination. With `out_dir`, each run
/// writes to `out_dir/<selector>/seed_<seed>/` and the per-run table and
/// selector comparison land in `runs.csv` and `comparison.csv`.
pub fn sweep(
    config: &CampaignConfig,
    seeds: Range<u64>,
    selectors: Option<&[SelectorKind]>,
    out_dir: Option<&Path>,
) -> Result<Vec<SweepRun>> {
    let selectors = selectors.map_or_else(|| vec![config.selector], <[_]>::to_vec);
    let mut runs = Vec::new();
    for &selector in &selectors {
        for seed in seeds.clone() {
            let mut cfg = config.clone();
            cfg.selector = selector;
            cfg.seed = seed;
            let opts = RunOptions {
                out_dir: out_dir.map(|d| d.join(selector.as_str()).join(format!("seed_{seed}"))),
                persist_snapshots: false,
            };
            let outcome = run_campaign(&cfg, &opts)?;
            if let Some(reason) = &outcome.aborted {
                log::warn!("{selector} seed {seed} aborted: {reason}");
            }
            runs.push(SweepRun {
                selector,
                seed,
                final_best_value: outcome.summary.best_value,
                labels_total: outcome.summary.labels_total,
                versions_published: outcome.summary.versions_published,
                aborted: outcome.aborted.is_some(),
            });
        }
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_csv(std::fs::File::create(dir.join("runs.csv"))?, &runs)?;
        write_csv(std::fs::File::create(dir.join("comparison.csv"))?, &compare_selectors(&runs))?;
    }
    Ok(runs)
}

/// Mean and sample standard deviation of the final best value per
/// selector, in first-seen order.
pub fn compare_selectors(runs: &[SweepRun]) -> Vec<SelectorSummary> {
    let mut order: Vec<SelectorKind> = Vec::new();
    for r in runs {
        if !order.contains(&r.selector) {
            order.push(r.selector);
        }
    }
    order
        .into_iter()
        .map(|selector| {
            let rows: Vec<&SweepRun> = runs.iter().filter(|r| r.selector == selector).collect();
            let n = rows.len();
            let mean = rows.iter().map(|r| r.final_best_value).sum::<f64>() / n as f64;
            let var = if n > 1 {
                rows.iter().map(|r| (r.final_best_value - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            SelectorSummary {
                selector,
                n_seeds: n,
                mean_final_best: mean,
                std_final_best: var.sqrt(),
                mean_labels: rows.iter().map(|r| r.labels_total as f64).sum::<f64>() / n as f64,
            }
        })
        .collect()
}

pub fn write_csv<W: Write, S: Serialize>(out: W, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("0..4").unwrap(), 0..4);
        assert_eq!(parse_seed_range("3..=5").unwrap(), 3..6);
        assert_eq!(parse_seed_range(" 2 .. 3 ").unwrap(), 2..3);
        for bad in ["", "4", "5..5", "6..2", "a..b", "1..=18446744073709551615"] {
            assert!(parse_seed_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn comparison_statistics() {
        let run = |selector, v: f64, labels| SweepRun {
            selector,
            seed: 0,
            final_best_value: v,
            labels_total: labels,
            versions_published: 0,
            aborted: false,
        };
        let runs = [
            run(SelectorKind::Bald, 1.0, 3),
            run(SelectorKind::Random, 5.0, 0),
            run(SelectorKind::Bald, 3.0, 6),
        ];
        let c = compare_selectors(&runs);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].selector, SelectorKind::Bald);
        assert_eq!(c[0].n_seeds, 2);
        assert_eq!(c[0].mean_final_best, 2.0);
        assert!((c[0].std_final_best - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c[0].mean_labels, 4.5);
        assert_eq!(c[1].std_final_best, 0.0);
    }
}
