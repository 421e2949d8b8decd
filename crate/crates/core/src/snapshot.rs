//! Single-slot, versioned snapshot store.
//!
//! One writer publishes immutable snapshots; any number of readers fetch the
//! latest one. Reads are a lock-free pointer load and never wait for a
//! writer, and a reader holds an `Arc` to a complete snapshot, so it can
//! never observe a partially written one. Versions start at 1; version 0
//! means nothing has been published yet.

use std::ops::Deref;
use std::sync::{Arc, Mutex, PoisonError};

use arc_swap::ArcSwapOption;

use crate::error::Result;

/// Payloads check their own invariants before publication.
pub trait Validate {
    fn validate(&self) -> Result<()>;
}

impl<T: Validate> Validate for Vec<T> {
    fn validate(&self) -> Result<()> {
        self.iter().try_for_each(Validate::validate)
    }
}

impl Validate for crate::types::TraceRecord {
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

/// An immutable published value together with the version it was assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<P> {
    pub version: u64,
    pub payload: P,
}

impl<P> Deref for Snapshot<P> {
    type Target = P;

    fn deref(&self) -> &P {
        &self.payload
    }
}

pub struct SnapshotStore<P> {
    slot: ArcSwapOption<Snapshot<P>>,
    // serializes publishers so versions stay gap-free; readers never touch it
    writer: Mutex<u64>,
}

impl<P> Default for SnapshotStore<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> SnapshotStore<P> {
    pub fn new() -> Self {
        Self {
            slot: ArcSwapOption::const_empty(),
            writer: Mutex::new(0),
        }
    }

    /// Most recent snapshot, or `None` before the first publication.
    pub fn latest(&self) -> Option<Arc<Snapshot<P>>> {
        self.slot.load_full()
    }

    /// Version of the latest snapshot, 0 if none.
    pub fn version(&self) -> u64 {
        self.slot.load().as_ref().map_or(0, |s| s.version)
    }
}

impl<P: Validate> SnapshotStore<P> {
    /// Validates and publishes `payload`, returning the assigned version.
    pub fn publish(&self, payload: P) -> Result<u64> {
        payload.validate()?;
        let mut last = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        let version = *last + 1;
        self.slot.store(Some(Arc::new(Snapshot { version, payload })));
        *last = version;
        Ok(version)
    }
}
