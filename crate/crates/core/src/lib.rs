//! Deterministic discrete-event simulation of component-based settlement
//! systems.
//!
//! Two execution modes share one data model:
//!
//! * **real-time**: a network of components exchanges dense timed streams
//!   (one item per tick, [hiatons](timed_streams::TimedItem::Hiaton) marking
//!   silent ticks) over delayed channels; every consumed and emitted item is
//!   recorded in a [`trace::Trace`].
//! * **batch**: a set of settlement elements is split into accepted and
//!   rejected parts by a greedy selector ([`partition::select_partition`]),
//!   checked against an exhaustive oracle on small instances.
//!
//! [`workload`] generates both kinds of input from a seed, and [`scenario`]
//! ties everything together for the `settlesim` binary.

pub mod digest;
pub mod network;
pub mod partition;
pub mod scenario;
pub mod timed_streams;
pub mod trace;
pub mod workload;

pub use timed_streams::{make_hiaton, merge, TimeTag, TimedItem, TimedStream};
