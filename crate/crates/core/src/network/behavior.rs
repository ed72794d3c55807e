//! Built-in component behaviours, selectable by name from a scenario file.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::{Component, Item, Payload, StepFunction};
use crate::timed_streams::{make_hiaton, TimeTag, TimedItem};

/// Closed set of stock behaviours.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    /// `ports` in, `ports` out; each input is forwarded to the matching output.
    Identity { ports: usize },
    /// `in_ports` in, one out. Payloads are queued in port order and released
    /// one per tick.
    Buffer { in_ports: usize },
    /// One in, `out_ports` out. Element payloads go to the port mapped from
    /// their `queue` field; anything else goes to `default_port`.
    Router {
        out_ports: usize,
        #[serde(default)]
        routes: BTreeMap<String, usize>,
        #[serde(default)]
        default_port: usize,
    },
    /// One in, one out. Counts payloads and reports the running count every
    /// `period` ticks.
    Counter { period: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BehaviorError {
    #[error("{0} must have at least one port")]
    NoPorts(&'static str),
    #[error("route to port {port} exceeds {out_ports} out-ports")]
    RouteOutOfRange { port: usize, out_ports: usize },
    #[error("counter period must be ≥ 1")]
    ZeroPeriod,
}

/// State shared by every stock behaviour.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BehaviorState {
    pub queue: VecDeque<Payload>,
    pub seen: u64,
}

impl Behavior {
    pub fn arity(&self) -> (usize, usize) {
        match self {
            Behavior::Identity { ports } => (*ports, *ports),
            Behavior::Buffer { in_ports } => (*in_ports, 1),
            Behavior::Router { out_ports, .. } => (1, *out_ports),
            Behavior::Counter { .. } => (1, 1),
        }
    }

    pub fn check(&self) -> Result<(), BehaviorError> {
        match self {
            Behavior::Identity { ports: 0 } => Err(BehaviorError::NoPorts("identity")),
            Behavior::Buffer { in_ports: 0 } => Err(BehaviorError::NoPorts("buffer")),
            Behavior::Router { out_ports: 0, .. } => Err(BehaviorError::NoPorts("router")),
            Behavior::Router {
                out_ports,
                routes,
                default_port,
            } => {
                for &port in routes.values().chain(std::iter::once(default_port)) {
                    if port >= *out_ports {
                        return Err(BehaviorError::RouteOutOfRange {
                            port,
                            out_ports: *out_ports,
                        });
                    }
                }
                Ok(())
            }
            Behavior::Counter { period: 0 } => Err(BehaviorError::ZeroPeriod),
            _ => Ok(()),
        }
    }

    pub fn component(self, id: impl Into<String>) -> Result<Component, BehaviorError> {
        self.check()?;
        let (ins, outs) = self.arity();
        Ok(Component::new(id, ins, outs, self, BehaviorState::default()))
    }
}

impl StepFunction for Behavior {
    type State = BehaviorState;

    fn step(&self, mut state: BehaviorState, tick: TimeTag, inputs: &[Item]) -> (BehaviorState, Vec<Item>) {
        let out = match self {
            Behavior::Identity { .. } => inputs.iter().map(|i| i.clone().retagged(tick)).collect(),
            Behavior::Buffer { .. } => {
                state.queue.extend(inputs.iter().filter_map(|i| i.value().cloned()));
                vec![match state.queue.pop_front() {
                    Some(value) => TimedItem::Payload { tag: tick, value },
                    None => make_hiaton(tick),
                }]
            }
            Behavior::Router {
                out_ports,
                routes,
                default_port,
            } => {
                let mut out: Vec<Item> = (0..*out_ports).map(|_| make_hiaton(tick)).collect();
                if let Some(value) = inputs.first().and_then(|i| i.value()) {
                    let port = value
                        .get("queue")
                        .and_then(|q| q.as_str())
                        .and_then(|q| routes.get(q))
                        .copied()
                        .unwrap_or(*default_port);
                    out[port] = TimedItem::Payload {
                        tag: tick,
                        value: value.clone(),
                    };
                }
                out
            }
            Behavior::Counter { period } => {
                state.seen += inputs.iter().filter(|i| !i.is_hiaton()).count() as u64;
                if (tick.0 + 1).is_multiple_of(*period) {
                    vec![TimedItem::Payload {
                        tag: tick,
                        value: json!({ "count": state.seen }),
                    }]
                } else {
                    vec![make_hiaton(tick)]
                }
            }
        };
        (state, out)
    }
}
