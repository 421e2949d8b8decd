//! Trace CSV, summary JSON and label dumps.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CampaignHandle, CampaignOutcome};
use crate::config::CampaignConfig;
use crate::error::Result;
use crate::types::TraceRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: CampaignConfig,
    pub seed: u64,
    pub best_value: f64,
    pub best_x: Vec<f64>,
    pub labels_total: usize,
    pub versions_published: u64,
    pub runtime_ms: u64,
}

impl Summary {
    pub(crate) fn new(handle: &CampaignHandle, runtime_ms: u64) -> Self {
        let best = handle
            .observations
            .latest()
            .and_then(|s| s.payload.best().cloned());
        Self {
            config: handle.config.clone(),
            seed: handle.config.seed,
            best_value: best.as_ref().map_or(f64::NAN, |o| o.y),
            best_x: best.map(|o| o.x).unwrap_or_default(),
            labels_total: handle.labels_total(),
            versions_published: handle.preferences.version(),
            runtime_ms,
        }
    }
}

/// Columns `iteration,best_value,incumbent_norm,labels_total,
/// pref_posterior_version_used,wall_ms` with a header row.
pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if trace.is_empty() {
        w.write_record([
            "iteration",
            "best_value",
            "incumbent_norm",
            "labels_total",
            "pref_posterior_version_used",
            "wall_ms",
        ])?;
    }
    for r in trace {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<TraceRecord>, _>>()?)
}

pub(crate) fn write_outputs(dir: &Path, outcome: &CampaignOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trace_csv(BufWriter::new(File::create(dir.join("trace.csv"))?), &outcome.trace)?;
    let mut s = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut s, &outcome.summary)?;
    s.write_all(b"\n")?;
    s.flush()?;
    let mut l = BufWriter::new(File::create(dir.join("labels.json"))?);
    serde_json::to_writer_pretty(&mut l, &outcome.labels)?;
    l.write_all(b"\n")?;
    l.flush()?;
    Ok(())
}
