//! The human side of live mode: pairs waiting for a label and labels
//! waiting for the feedback loop. Every lock here is held only for a
//! queue operation, never across training.

use std::collections::{HashSet, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::types::{LabelSource, PreferenceExample};

/// A comparison awaiting a human label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingPair {
    pub pair_id: String,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub norm0: f64,
    pub norm1: f64,
    /// Objective values; both points have been evaluated.
    pub f0: Option<f64>,
    pub f1: Option<f64>,
    /// Milliseconds since the Unix epoch.
    pub presented_at: u64,
    pub selector_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOutcome {
    Accepted,
    UnknownPair,
    AlreadyLabeled,
    InvalidLabel,
}

#[derive(Default)]
struct Queues {
    pending: VecDeque<PendingPair>,
    labeled: HashSet<String>,
}

#[derive(Default)]
pub struct LiveBridge {
    queues: Mutex<Queues>,
    inbox: Mutex<Vec<PreferenceExample>>,
    next_id: AtomicU64,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl LiveBridge {
    pub fn new() -> Self {
        Self::default()
    }

    /// Up to `limit` oldest unlabeled pairs.
    pub fn pending(&self, limit: usize) -> Vec<PendingPair> {
        let q = self.queues.lock().unwrap_or_else(|e| e.into_inner());
        q.pending.iter().take(limit).cloned().collect()
    }

    pub fn pending_len(&self) -> usize {
        self.queues.lock().unwrap_or_else(|e| e.into_inner()).pending.len()
    }

    /// Queues a new pair unless the same two points are already pending.
    /// Returns the assigned id.
    pub fn offer(&self, x0: Vec<f64>, x1: Vec<f64>, f0: Option<f64>, f1: Option<f64>, score: f64) -> Option<String> {
        let mut q = self.queues.lock().unwrap_or_else(|e| e.into_inner());
        let dup = q
            .pending
            .iter()
            .any(|p| (p.x0 == x0 && p.x1 == x1) || (p.x0 == x1 && p.x1 == x0));
        if dup || x0 == x1 {
            return None;
        }
        let pair_id = format!("p{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1);
        q.pending.push_back(PendingPair {
            pair_id: pair_id.clone(),
            norm0: norm(&x0),
            norm1: norm(&x1),
            x0,
            x1,
            f0,
            f1,
            presented_at: now_ms(),
            selector_score: score,
        });
        Some(pair_id)
    }

    /// Records a label for a pending pair; never waits for training.
    pub fn submit(&self, pair_id: &str, label: u8, iteration: usize) -> LabelOutcome {
        if label > 1 {
            return LabelOutcome::InvalidLabel;
        }
        let pair = {
            let mut q = self.queues.lock().unwrap_or_else(|e| e.into_inner());
            match q.pending.iter().position(|p| p.pair_id == pair_id) {
                Some(pos) => {
                    let p = q.pending.remove(pos).expect("position is in range");
                    q.labeled.insert(p.pair_id.clone());
                    p
                }
                None if q.labeled.contains(pair_id) => return LabelOutcome::AlreadyLabeled,
                None => return LabelOutcome::UnknownPair,
            }
        };
        let example = PreferenceExample {
            x0: pair.x0,
            x1: pair.x1,
            label,
            source: LabelSource::Human,
            created_at_iteration: iteration,
        };
        self.inbox.lock().unwrap_or_else(|e| e.into_inner()).push(example);
        LabelOutcome::Accepted
    }

    pub(crate) fn drain(&self) -> Vec<PreferenceExample> {
        std::mem::take(&mut *self.inbox.lock().unwrap_or_else(|e| e.into_inner()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_lifecycle() {
        let b = LiveBridge::new();
        let id = b.offer(vec![0.0], vec![1.0], Some(1.0), None, 0.5).unwrap();
        assert!(b.offer(vec![1.0], vec![0.0], None, None, 0.0).is_none());
        assert_eq!(b.pending(10).len(), 1);
        assert_eq!(b.submit("nope", 0, 0), LabelOutcome::UnknownPair);
        assert_eq!(b.submit(&id, 2, 0), LabelOutcome::InvalidLabel);
        assert_eq!(b.submit(&id, 1, 3), LabelOutcome::Accepted);
        assert_eq!(b.submit(&id, 1, 3), LabelOutcome::AlreadyLabeled);
        assert!(b.pending(10).is_empty());
        let got = b.drain();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].source, LabelSource::Human);
        assert_eq!(got[0].created_at_iteration, 3);
        assert!(b.drain().is_empty());
    }

    #[test]
    fn oldest_first() {
        let b = LiveBridge::new();
        for i in 0..3 {
            b.offer(vec![i as f64], vec![10.0 + i as f64], None, None, 0.0);
        }
        let ids: Vec<String> = b.pending(2).into_iter().map(|p| p.pair_id).collect();
        assert_eq!(ids, vec!["p1", "p2"]);
    }
}
