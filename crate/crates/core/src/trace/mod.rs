//! Complete event traces of real-time runs.
//!
//! The runner records one [`TraceEvent`] for every item a component consumes
//! and every item it emits. Payloads are stored as a stable digest; the value
//! itself is kept only when inline capture is switched on.

mod analysis;
mod export;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analysis::{animation_frames, summarize, ComponentCounts, Frame, Summary};
pub use export::{export_trace, export_trace_to_path, import_trace, import_trace_from_path, ExportFormat};

/// `Consume` sorts before `Emit`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Consume,
    Emit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Payload,
    Hiaton,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub tick: u64,
    pub comp: Arc<str>,
    pub port: usize,
    pub dir: Direction,
    pub kind: ItemKind,
    /// FNV-1a of the payload's compact JSON; 0 for hiatons.
    pub digest: u64,
    pub payload: Option<serde_json::Value>,
}

impl TraceEvent {
    pub fn key(&self) -> (u64, &str, usize, Direction) {
        (self.tick, &self.comp, self.port, self.dir)
    }

    pub fn is_payload(&self) -> bool {
        self.kind == ItemKind::Payload
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t{} {}:{} {:?} {:?}",
            self.tick, self.comp, self.port, self.dir, self.kind
        )
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("event {event} is not after the previous event {previous}")]
    OutOfOrder { previous: String, event: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {record}: {message}")]
    Malformed { record: usize, message: String },
}

/// Events in strictly increasing `(tick, comp, port, dir)` order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<TraceEvent>) -> Result<Self, TraceError> {
        let mut t = Trace {
            events: Vec::with_capacity(events.len()),
        };
        for e in events {
            t.record(e)?;
        }
        Ok(t)
    }

    pub fn record(&mut self, e: TraceEvent) -> Result<(), TraceError> {
        if let Some(last) = self.events.last() {
            if last.key().cmp(&e.key()) != Ordering::Less {
                return Err(TraceError::OutOfOrder {
                    previous: last.to_string(),
                    event: e.to_string(),
                });
            }
        }
        self.events.push(e);
        Ok(())
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub(crate) fn reserve(&mut self, n: usize) {
        self.events.reserve(n);
    }
}

/// Functional form of [`Trace::record`].
pub fn record_event(mut trace: Trace, e: TraceEvent) -> Result<Trace, TraceError> {
    trace.record(e)?;
    Ok(trace)
}
