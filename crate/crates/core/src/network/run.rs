use std::any::Any;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Channel, Item, Network, NetworkError, PortRef, StateBox, Stream};
use crate::digest::payload_digest;
use crate::partition::Element;
use crate::timed_streams::{make_hiaton, TimeTag, TimedItem};
use crate::trace::{Direction, ItemKind, Trace, TraceEvent};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Store payload values in the trace alongside their digests.
    pub inline_payloads: bool,
}

/// Everything a run produced.
pub struct RunResult {
    t_end: TimeTag,
    trace: Trace,
    emitted: BTreeMap<PortRef, Stream>,
    sinks: BTreeMap<String, PortRef>,
    channels: Vec<Channel>,
    states: BTreeMap<String, StateBox>,
}

impl std::fmt::Debug for RunResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunResult")
            .field("t_end", &self.t_end)
            .field("events", &self.trace.len())
            .field("sinks", &self.sinks)
            .finish_non_exhaustive()
    }
}

impl RunResult {
    pub fn t_end(&self) -> TimeTag {
        self.t_end
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Everything emitted on an out-port, one item per tick.
    pub fn emitted(&self, port: &PortRef) -> Option<&Stream> {
        self.emitted.get(port)
    }

    pub fn sink_ids(&self) -> impl Iterator<Item = &str> {
        self.sinks.keys().map(String::as_str)
    }

    pub fn sink(&self, id: &str) -> Option<&Stream> {
        self.sinks.get(id).and_then(|p| self.emitted.get(p))
    }

    /// What the channel delivered to its in-port over the run: `delay`
    /// leading hiatons followed by the shifted emissions, cut at `t_end`.
    pub fn delivered(&self, ch: &Channel) -> Option<Stream> {
        let sent = self.emitted.get(&ch.from)?;
        let mut out = Stream::with_capacity(sent.len());
        for t in 0..=self.t_end.0 {
            if t < ch.delay {
                out.push_unchecked(make_hiaton(t));
            } else {
                let item = sent.get((t - ch.delay) as usize)?;
                out.push_unchecked(item.clone().retagged(TimeTag(t)));
            }
        }
        Some(out)
    }

    /// Items sent on `ch` that had not arrived when the run stopped.
    pub fn in_flight(&self, ch: &Channel) -> usize {
        (ch.delay.min(self.t_end.0 + 1)) as usize
    }

    /// Final state of component `id`, if its state type is `S`.
    pub fn state<S: Any>(&self, id: &str) -> Option<&S> {
        self.states
            .get(id)?
            .downcast_ref::<Option<S>>()
            .and_then(Option::as_ref)
    }
}

enum Feed {
    Source(usize),
    Channel { from: usize, delay: u64 },
}

pub fn run_realtime(net: &Network, t_end: TimeTag) -> Result<RunResult, NetworkError> {
    run_realtime_with(net, t_end, RunOptions::default())
}

/// Runs ticks `0..=t_end`. Within a tick components step in ascending id
/// order; each reads the items that arrive this tick and emits one item per
/// out-port. Aborts if a component breaks that contract.
pub fn run_realtime_with(net: &Network, t_end: TimeTag, opts: RunOptions) -> Result<RunResult, NetworkError> {
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(NetworkError::Invalid(violations));
    }
    for s in net.sources() {
        if !s.stream.is_dense(t_end) {
            return Err(NetworkError::SourceNotDense {
                port: s.to.clone(),
                horizon: t_end,
            });
        }
    }

    let mut order: Vec<usize> = (0..net.components().len()).collect();
    order.sort_by(|&a, &b| net.components()[a].id().cmp(net.components()[b].id()));

    let horizon = t_end.0 as usize + 1;
    let mut out_index: BTreeMap<PortRef, usize> = BTreeMap::new();
    let mut out_ports: Vec<PortRef> = Vec::new();
    for &ci in &order {
        let c = &net.components()[ci];
        for p in 0..c.out_ports() {
            out_index.insert(PortRef::new(c.id(), p), out_ports.len());
            out_ports.push(PortRef::new(c.id(), p));
        }
    }
    let mut emitted: Vec<Stream> = (0..out_ports.len()).map(|_| Stream::with_capacity(horizon)).collect();

    let mut feeds: BTreeMap<PortRef, Feed> = BTreeMap::new();
    for (i, s) in net.sources().iter().enumerate() {
        feeds.insert(s.to.clone(), Feed::Source(i));
    }
    for ch in net.channels() {
        feeds.insert(
            ch.to.clone(),
            Feed::Channel {
                from: out_index[&ch.from],
                delay: ch.delay,
            },
        );
    }

    struct Slot<'a> {
        id: Arc<str>,
        step: &'a dyn super::DynStep,
        feeds: Vec<&'a Feed>,
        outs: Vec<usize>,
        state: StateBox,
    }
    let mut slots: Vec<Slot> = order
        .iter()
        .map(|&ci| {
            let c = &net.components()[ci];
            Slot {
                id: Arc::from(c.id()),
                step: c.step.as_ref(),
                feeds: (0..c.in_ports()).map(|p| &feeds[&PortRef::new(c.id(), p)]).collect(),
                outs: (0..c.out_ports())
                    .map(|p| out_index[&PortRef::new(c.id(), p)])
                    .collect(),
                state: c.fresh_state(),
            }
        })
        .collect();

    let mut trace = Trace::new();
    let per_tick: usize = slots.iter().map(|s| s.feeds.len() + s.outs.len()).sum();
    trace.reserve(per_tick.saturating_mul(horizon));

    let event = |tick: u64, comp: &Arc<str>, port: usize, dir: Direction, item: &Item| {
        let (kind, digest, payload) = match item {
            TimedItem::Payload { value, .. } => (
                ItemKind::Payload,
                payload_digest(value),
                opts.inline_payloads.then(|| value.clone()),
            ),
            TimedItem::Hiaton { .. } => (ItemKind::Hiaton, 0, None),
        };
        TraceEvent {
            tick,
            comp: comp.clone(),
            port,
            dir,
            kind,
            digest,
            payload,
        }
    };

    let mut inputs: Vec<Item> = Vec::new();
    for t in 0..=t_end.0 {
        let tick = TimeTag(t);
        for slot in slots.iter_mut() {
            inputs.clear();
            for feed in &slot.feeds {
                inputs.push(match feed {
                    Feed::Source(i) => net.sources()[*i].stream.items()[t as usize].clone(),
                    Feed::Channel { from, delay } => {
                        if t < *delay {
                            make_hiaton(tick)
                        } else {
                            emitted[*from].items()[(t - delay) as usize].clone().retagged(tick)
                        }
                    }
                });
            }

            let outputs = slot.step.step(&mut slot.state, tick, &inputs);
            if outputs.len() != slot.outs.len() {
                return Err(NetworkError::Contract {
                    component: slot.id.to_string(),
                    tick,
                    detail: format!("emitted {} items for {} out-ports", outputs.len(), slot.outs.len()),
                });
            }
            if let Some((port, bad)) = outputs.iter().enumerate().find(|(_, o)| o.tag() != tick) {
                return Err(NetworkError::Contract {
                    component: slot.id.to_string(),
                    tick,
                    detail: format!("out-port {port} item tagged {} instead of {tick}", bad.tag()),
                });
            }

            for port in 0..inputs.len().max(outputs.len()) {
                if let Some(item) = inputs.get(port) {
                    trace
                        .record(event(t, &slot.id, port, Direction::Consume, item))
                        .expect("runner records in key order");
                }
                if let Some(item) = outputs.get(port) {
                    trace
                        .record(event(t, &slot.id, port, Direction::Emit, item))
                        .expect("runner records in key order");
                }
            }
            for (item, &o) in outputs.into_iter().zip(&slot.outs) {
                emitted[o].push_unchecked(item);
            }
        }
    }

    let states = slots.into_iter().map(|s| (s.id.to_string(), s.state)).collect();
    Ok(RunResult {
        t_end,
        trace,
        emitted: out_ports.into_iter().zip(emitted).collect(),
        sinks: net.sinks().iter().map(|s| (s.id.clone(), s.from.clone())).collect(),
        channels: net.channels().to_vec(),
        states,
    })
}

/// Elements delivered on every sink, ordered by `(tick, sink id)`.
pub fn drain(result: &RunResult) -> Result<Vec<Element>, NetworkError> {
    let ids: Vec<&str> = result.sink_ids().collect();
    drain_sinks(result, &ids)
}

/// Elements delivered on the named sinks, ordered by `(tick, sink id)`.
pub fn drain_sinks(result: &RunResult, sinks: &[&str]) -> Result<Vec<Element>, NetworkError> {
    let mut found: Vec<(TimeTag, &str, &serde_json::Value)> = Vec::new();
    for &id in sinks {
        let stream = result
            .sink(id)
            .ok_or_else(|| NetworkError::UnknownSink(id.to_string()))?;
        for item in stream {
            if let TimedItem::Payload { tag, value } = item {
                found.push((*tag, id, value));
            }
        }
    }
    found.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    found
        .into_iter()
        .map(|(tick, sink, value)| {
            serde_json::from_value(value.clone()).map_err(|e| NetworkError::Decode {
                sink: sink.to_string(),
                tick,
                message: e.to_string(),
            })
        })
        .collect()
}
