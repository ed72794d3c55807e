use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Direction, ItemKind, Trace};
use crate::digest::{to_hex, Fnv64};
use crate::network::{Channel, PortRef};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentCounts {
    pub consumed_payloads: u64,
    pub consumed_hiatons: u64,
    pub emitted_payloads: u64,
    pub emitted_hiatons: u64,
}

impl ComponentCounts {
    pub fn emitted(&self) -> u64 {
        self.emitted_payloads + self.emitted_hiatons
    }

    pub fn consumed(&self) -> u64 {
        self.consumed_payloads + self.consumed_hiatons
    }
}

/// Aggregate statistics of a trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// One past the last tick seen; 0 for an empty trace.
    pub ticks: u64,
    pub events: u64,
    /// Distinct `comp:port` pairs that emitted at least once.
    pub emit_ports: u64,
    pub components: BTreeMap<String, ComponentCounts>,
    /// Payloads per tick on each out-port, keyed `comp:port`.
    pub throughput: BTreeMap<String, f64>,
    /// Per component and tick: payloads consumed so far minus payloads
    /// emitted so far.
    pub queue_depth: BTreeMap<String, Vec<i64>>,
    /// Ticks between the first and last sighting of a payload digest,
    /// mapped to the number of digests with that span.
    pub latency_histogram: BTreeMap<u64, u64>,
}

impl Summary {
    pub fn emitted_payloads(&self) -> u64 {
        self.components.values().map(|c| c.emitted_payloads).sum()
    }

    pub fn emitted_hiatons(&self) -> u64 {
        self.components.values().map(|c| c.emitted_hiatons).sum()
    }

    /// Share of emitted items that are payloads; 0 when nothing was emitted.
    pub fn payload_ratio(&self) -> f64 {
        let p = self.emitted_payloads();
        let total = p + self.emitted_hiatons();
        if total == 0 {
            0.0
        } else {
            p as f64 / total as f64
        }
    }

    pub fn hiaton_ratio(&self) -> f64 {
        let total = self.emitted_payloads() + self.emitted_hiatons();
        if total == 0 {
            0.0
        } else {
            1.0 - self.payload_ratio()
        }
    }

    /// A dense run emits exactly one item per tick on every out-port.
    pub fn reconciles(&self) -> bool {
        self.emitted_payloads() + self.emitted_hiatons() == self.ticks * self.emit_ports
    }
}

pub fn summarize(trace: &Trace) -> Summary {
    let events = trace.events();
    let ticks = events.last().map_or(0, |e| e.tick + 1);
    let mut components: BTreeMap<String, ComponentCounts> = BTreeMap::new();
    let mut port_payloads: BTreeMap<String, u64> = BTreeMap::new();
    let mut depth_delta: BTreeMap<String, BTreeMap<u64, i64>> = BTreeMap::new();
    let mut seen: HashMap<u64, (u64, u64)> = HashMap::new();

    for e in events {
        let c = components.entry(e.comp.to_string()).or_default();
        let payload = e.kind == ItemKind::Payload;
        match (e.dir, payload) {
            (Direction::Consume, true) => c.consumed_payloads += 1,
            (Direction::Consume, false) => c.consumed_hiatons += 1,
            (Direction::Emit, true) => c.emitted_payloads += 1,
            (Direction::Emit, false) => c.emitted_hiatons += 1,
        }
        if e.dir == Direction::Emit {
            *port_payloads.entry(format!("{}:{}", e.comp, e.port)).or_default() += u64::from(payload);
        }
        if payload {
            let d = if e.dir == Direction::Consume { 1 } else { -1 };
            *depth_delta
                .entry(e.comp.to_string())
                .or_default()
                .entry(e.tick)
                .or_default() += d;
            seen.entry(e.digest)
                .and_modify(|s| s.1 = e.tick)
                .or_insert((e.tick, e.tick));
        }
    }

    let throughput = port_payloads
        .iter()
        .map(|(k, &n)| (k.clone(), n as f64 / ticks as f64))
        .collect();
    let queue_depth = components
        .keys()
        .map(|comp| {
            let deltas = depth_delta.get(comp);
            let mut level = 0i64;
            let series = (0..ticks)
                .map(|t| {
                    level += deltas.and_then(|d| d.get(&t)).copied().unwrap_or(0);
                    level
                })
                .collect();
            (comp.clone(), series)
        })
        .collect();
    let mut latency_histogram = BTreeMap::new();
    for (first, last) in seen.into_values() {
        *latency_histogram.entry(last - first).or_default() += 1;
    }

    Summary {
        ticks,
        events: events.len() as u64,
        emit_ports: port_payloads.len() as u64,
        components,
        throughput,
        queue_depth,
        latency_histogram,
    }
}

/// Snapshot of a run at the end of one tick.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u64,
    /// Payloads sent on each channel (keyed by its label) and not yet
    /// delivered.
    pub occupancy: BTreeMap<String, u64>,
    /// Digest over everything each component has consumed so far. Two runs
    /// whose components saw the same inputs agree here.
    pub state_digests: BTreeMap<String, String>,
}

/// One frame per tick of the trace.
///
/// A payload emitted at tick `t` on a channel of delay `d` is in flight at
/// the end of ticks `t..t+d`, i.e. it counts toward the occupancy of those
/// `d` frames.
pub fn animation_frames(trace: &Trace, channels: &[Channel]) -> Vec<Frame> {
    let events = trace.events();
    let ticks = events.last().map_or(0, |e| e.tick + 1) as usize;

    let ports: BTreeSet<&PortRef> = channels.iter().map(|c| &c.from).collect();
    // prefix[p][t] = payloads emitted on port p at ticks < t.
    let mut per_tick: BTreeMap<&PortRef, Vec<u64>> = ports.iter().map(|&p| (p, vec![0; ticks])).collect();
    let mut comps: BTreeMap<&str, Fnv64> = BTreeMap::new();
    for e in events {
        comps.entry(&e.comp).or_default();
        if e.dir == Direction::Emit && e.kind == ItemKind::Payload {
            if let Some((_, v)) = per_tick
                .iter_mut()
                .find(|(p, _)| p.component == *e.comp && p.port == e.port)
            {
                v[e.tick as usize] += 1;
            }
        }
    }
    let prefix: BTreeMap<&PortRef, Vec<u64>> = per_tick
        .into_iter()
        .map(|(p, v)| {
            let mut acc = Vec::with_capacity(v.len() + 1);
            acc.push(0u64);
            for x in v {
                acc.push(acc.last().copied().unwrap_or(0) + x);
            }
            (p, acc)
        })
        .collect();

    let mut frames = Vec::with_capacity(ticks);
    let mut i = 0;
    for t in 0..ticks {
        while i < events.len() && events[i].tick as usize == t {
            let e = &events[i];
            if e.dir == Direction::Consume {
                let h = comps.get_mut(&*e.comp).expect("component registered");
                h.write_u64(e.port as u64);
                h.write(&[e.kind as u8]);
                h.write_u64(e.digest);
            }
            i += 1;
        }
        let occupancy = channels
            .iter()
            .map(|ch| {
                let acc = &prefix[&ch.from];
                let hi = t + 1;
                let lo = hi.saturating_sub(ch.delay.min(hi as u64) as usize);
                (ch.label(), acc[hi] - acc[lo])
            })
            .collect();
        let state_digests = comps.iter().map(|(&c, h)| (c.to_owned(), to_hex(h.finish()))).collect();
        frames.push(Frame {
            tick: t as u64,
            occupancy,
            state_digests,
        });
    }
    frames
}
