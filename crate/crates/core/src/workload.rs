//! Seeded statistical generation of batch instances and event streams.
//!
//! All randomness comes from [`RngState`], a splitmix64 generator:
//!
//! ```text
//! state' = state + 0x9E3779B97F4A7C15            (wrapping)
//! z      = state'
//! z      = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (wrapping)
//! z      = (z ^ (z >> 27)) * 0x94D049BB133111EB  (wrapping)
//! output = z ^ (z >> 31)
//! ```
//!
//! Only integer arithmetic is involved, so a seed produces the same sequence
//! on every platform.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::network::Stream;
use crate::partition::{Constraint, Element, ElementId, Instance, Queue, QueueGroup, QueueId, QueueSystem, RuleKind};
use crate::timed_streams::{make_hiaton, TimeTag, TimedItem, TimedStream};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const ELEMENT_STREAM: u64 = 0x656c_656d; // "elem"
const EVENT_STREAM: u64 = 0x6576_6e74; // "evnt"

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit splitmix64 state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngState(pub u64);

/// Pure transition: the successor state and the output drawn from it.
pub fn next_random(state: RngState) -> (RngState, u64) {
    let s = state.0.wrapping_add(GAMMA);
    (RngState(s), mix(s))
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState(seed)
    }

    /// An independent generator for sub-stream `stream` of `seed`.
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        RngState(seed ^ mix(stream.wrapping_add(GAMMA)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let (s, v) = next_random(*self);
        *self = s;
        v
    }

    /// Uniform in `0..n` by multiply-shift; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Uniform in `lo..=hi`.
    pub fn in_range(&mut self, lo: i64, hi: i64) -> i64 {
        let span = (i128::from(hi) - i128::from(lo) + 1) as u128;
        let r = (u128::from(self.next_u64()) * span) >> 64;
        (i128::from(lo) + r as i128) as i64
    }

    pub fn chance(&mut self, p: Probability) -> bool {
        match p.threshold {
            None => true,
            Some(t) => self.next_u64() < t,
        }
    }

    /// `floor(mean)` plus one more with probability `frac(mean)`; the
    /// expectation is exactly `mean`.
    fn count_around(&mut self, mean: f64) -> usize {
        let whole = mean.floor();
        let extra = self.chance(Probability::new(mean - whole));
        whole as usize + usize::from(extra)
    }
}

/// A probability turned into an integer threshold on a 64-bit draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Probability {
    /// `None` means certainty.
    threshold: Option<u64>,
}

impl Probability {
    /// `p` is clamped into `[0, 1]`.
    pub fn new(p: f64) -> Self {
        if p >= 1.0 {
            Probability { threshold: None }
        } else if p > 0.0 {
            Probability {
                threshold: Some((p * 18_446_744_073_709_551_616.0) as u64),
            }
        } else {
            Probability { threshold: Some(0) }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySpec {
    pub resource: String,
    /// Bound as a fraction of the summed element values; usage is the value.
    pub bound_fraction: f64,
}

/// Knobs for generated workloads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadParams {
    #[serde(skip)]
    pub seed: u64,
    /// Probability of a payload per tick per source.
    pub event_frequency: f64,
    pub element_count: usize,
    /// Inclusive range of element values, minor units.
    pub value_range: (i64, i64),
    /// Expected cross-references per element.
    pub ref_density: f64,
    pub queue_count: usize,
    /// Rule of each queue group; queue `i` joins group `i % groups.len()`.
    pub groups: Vec<RuleKind>,
    /// Probability that queue `i` precedes queue `j`, for each `i < j`.
    pub queue_precedence_density: f64,
    /// Probability of a precedence pair between neighbouring queue members.
    pub member_precedence_density: f64,
    /// Expected `Requires` constraints per element.
    pub requires_density: f64,
    /// Expected `Excludes` constraints per element.
    pub excludes_density: f64,
    pub capacities: Vec<CapacitySpec>,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            seed: 0,
            event_frequency: 0.0,
            element_count: 0,
            value_range: (1, 1000),
            ref_density: 0.0,
            queue_count: 1,
            groups: vec![RuleKind::ValuePriority],
            queue_precedence_density: 0.0,
            member_precedence_density: 0.0,
            requires_density: 0.0,
            excludes_density: 0.0,
            capacities: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("{field} must lie in [0, 1], got {value}")]
    NotAProbability { field: &'static str, value: f64 },
    #[error("{field} must be a finite non-negative number, got {value}")]
    BadDensity { field: &'static str, value: f64 },
    #[error("value_range ({0}, {1}) must satisfy 0 ≤ min ≤ max")]
    BadValueRange(i64, i64),
    #[error("queue_count must be at least 1 when elements are generated")]
    NoQueues,
    #[error("groups must name at least one rule")]
    NoGroups,
}

impl WorkloadParams {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let prob = |field, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(WorkloadError::NotAProbability { field, value })
            }
        };
        prob("event_frequency", self.event_frequency)?;
        prob("queue_precedence_density", self.queue_precedence_density)?;
        prob("member_precedence_density", self.member_precedence_density)?;
        let density = |field, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(WorkloadError::BadDensity { field, value })
            }
        };
        density("ref_density", self.ref_density)?;
        density("requires_density", self.requires_density)?;
        density("excludes_density", self.excludes_density)?;
        for c in &self.capacities {
            density("bound_fraction", c.bound_fraction)?;
        }
        let (lo, hi) = self.value_range;
        if lo < 0 || lo > hi {
            return Err(WorkloadError::BadValueRange(lo, hi));
        }
        if self.element_count > 0 && self.queue_count == 0 {
            return Err(WorkloadError::NoQueues);
        }
        if self.groups.is_empty() {
            return Err(WorkloadError::NoGroups);
        }
        Ok(())
    }
}

fn width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(4)
}

/// `k` distinct indices in `0..n`, none equal to `skip`.
fn distinct_targets(rng: &mut RngState, n: usize, skip: usize, k: usize) -> Vec<usize> {
    let k = k.min(n.saturating_sub(1));
    let mut out: Vec<usize> = Vec::with_capacity(k);
    while out.len() < k {
        let t = rng.below(n as u64) as usize;
        if t != skip && !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// A random batch instance. Element ids are zero-padded (`e0000`, ...) so
/// lexical and numeric order agree. The result passes
/// [`crate::partition::validate_system`].
pub fn gen_elements(p: &WorkloadParams) -> Result<Instance, WorkloadError> {
    p.validate()?;
    let n = p.element_count;
    if n == 0 {
        return Ok(Instance::default());
    }
    let mut rng = RngState::for_stream(p.seed, ELEMENT_STREAM);
    let w = width(n);
    let ids: Vec<ElementId> = (0..n).map(|i| ElementId(format!("e{i:0w$}"))).collect();
    let qw = p.queue_count.saturating_sub(1).to_string().len().max(2);
    let queue_ids: Vec<QueueId> = (0..p.queue_count).map(|i| QueueId(format!("q{i:0qw$}"))).collect();

    let mut elements: Vec<Element> = Vec::with_capacity(n);
    let mut members: Vec<Vec<ElementId>> = vec![Vec::new(); p.queue_count];
    for id in &ids {
        let value = rng.in_range(p.value_range.0, p.value_range.1);
        let q = rng.below(p.queue_count as u64) as usize;
        members[q].push(id.clone());
        elements.push(Element {
            id: id.clone(),
            value,
            queue: queue_ids[q].clone(),
            refs: Vec::new(),
        });
    }
    for (i, e) in elements.iter_mut().enumerate() {
        let k = rng.count_around(p.ref_density);
        e.refs = distinct_targets(&mut rng, n, i, k)
            .into_iter()
            .map(|t| ids[t].clone())
            .collect();
    }

    let member_p = Probability::new(p.member_precedence_density);
    let queues: Vec<Queue> = queue_ids
        .iter()
        .zip(members)
        .map(|(qid, members)| {
            let rank: Vec<u64> = members.iter().map(|_| rng.next_u64()).collect();
            let mut precedence = Vec::new();
            for k in 1..members.len() {
                if rng.chance(member_p) {
                    let (a, b) = if (rank[k - 1], k - 1) < (rank[k], k) {
                        (k - 1, k)
                    } else {
                        (k, k - 1)
                    };
                    precedence.push((members[a].clone(), members[b].clone()));
                }
            }
            Queue {
                id: qid.clone(),
                members,
                precedence,
            }
        })
        .collect();
    let queue_p = Probability::new(p.queue_precedence_density);
    let mut queue_precedence = Vec::new();
    for i in 0..p.queue_count {
        for j in i + 1..p.queue_count {
            if rng.chance(queue_p) {
                queue_precedence.push((queue_ids[i].clone(), queue_ids[j].clone()));
            }
        }
    }

    let ng = p.groups.len().min(p.queue_count);
    let groups = (0..ng)
        .map(|g| QueueGroup {
            id: format!("g{g}").into(),
            queues: (g..p.queue_count).step_by(ng).map(|q| queue_ids[q].clone()).collect(),
            rule: p.groups[g],
        })
        .collect();

    let mut constraints = Vec::new();
    for i in 0..n {
        let k = rng.count_around(p.requires_density);
        for t in distinct_targets(&mut rng, n, i, k) {
            constraints.push(Constraint::Requires {
                a: ids[i].clone(),
                b: ids[t].clone(),
            });
        }
    }
    for i in 0..n {
        let k = rng.count_around(p.excludes_density);
        for t in distinct_targets(&mut rng, n, i, k) {
            constraints.push(Constraint::Excludes {
                a: ids[i].clone(),
                b: ids[t].clone(),
            });
        }
    }
    let total: i128 = elements.iter().map(|e| i128::from(e.value)).sum();
    for c in &p.capacities {
        let bound = (total as f64 * c.bound_fraction).floor().min(i64::MAX as f64) as i64;
        constraints.push(Constraint::Capacity {
            resource: c.resource.clone(),
            usage: elements
                .iter()
                .map(|e| (e.id.clone(), e.value))
                .collect::<BTreeMap<_, _>>(),
            bound,
        });
    }

    Ok(Instance {
        elements,
        system: QueueSystem {
            queues,
            queue_precedence,
        },
        groups,
        constraints,
    })
}

/// Event stream of source 0; see [`gen_event_stream_for`].
pub fn gen_event_stream(p: &WorkloadParams, t_end: TimeTag) -> Result<TimedStream<u64>, WorkloadError> {
    gen_event_stream_for(p, 0, t_end)
}

/// Dense stream over `0..=t_end`: each tick carries a payload with
/// probability `event_frequency`, a hiaton otherwise. Payloads are the
/// running event number, starting at 0. Each `source` index draws from its
/// own sub-stream of the seed.
pub fn gen_event_stream_for(
    p: &WorkloadParams,
    source: u64,
    t_end: TimeTag,
) -> Result<TimedStream<u64>, WorkloadError> {
    p.validate()?;
    let mut rng = RngState::for_stream(p.seed, EVENT_STREAM.wrapping_add(source));
    let freq = Probability::new(p.event_frequency);
    let mut out = TimedStream::with_capacity(t_end.0 as usize + 1);
    let mut seq = 0u64;
    for t in 0..=t_end.0 {
        if rng.chance(freq) {
            out.push_unchecked(TimedItem::payload(t, seq));
            seq += 1;
        } else {
            out.push_unchecked(make_hiaton(t));
        }
    }
    Ok(out)
}

/// Replaces event number `k` by the JSON of `elements[k]`; events beyond the
/// last element become hiatons. Density is preserved.
pub fn element_arrivals(events: &TimedStream<u64>, elements: &[Element]) -> Stream {
    let mut out = Stream::with_capacity(events.len());
    for item in events {
        let tag = item.tag();
        let next = match item.value().and_then(|&k| elements.get(k as usize)) {
            Some(e) => TimedItem::Payload {
                tag,
                value: serde_json::to_value(e).expect("element serializes"),
            },
            None => make_hiaton(tag),
        };
        out.push_unchecked(next);
    }
    out
}

/// Event numbers as payloads `{"source": source, "seq": n}`.
pub fn numbered_events(events: &TimedStream<u64>, source: u64) -> Stream {
    let mut out = Stream::with_capacity(events.len());
    for item in events {
        out.push_unchecked(match item {
            TimedItem::Payload { tag, value } => TimedItem::Payload {
                tag: *tag,
                value: json!({"source": source, "seq": value}),
            },
            TimedItem::Hiaton { tag } => make_hiaton(*tag),
        });
    }
    out
}
