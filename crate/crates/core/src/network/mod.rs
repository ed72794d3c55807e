//! Networks of communicating components run in synchronous discrete rounds.
//!
//! A component is a pure step function with an accumulating state: at every
//! tick it receives exactly one item per in-port and must return exactly one
//! item per out-port, tagged with the current tick. Channels carry a delay of
//! at least one tick, so a component never needs another component's output
//! from the same tick. Any topology, cyclic ones included, therefore advances
//! one tick per round and cannot deadlock.

mod behavior;
mod run;

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::marker::PhantomData;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timed_streams::{StreamError, TimeTag, TimedItem, TimedStream};

pub use behavior::{Behavior, BehaviorError, BehaviorState};
pub use run::{drain, drain_sinks, run_realtime, run_realtime_with, RunOptions, RunResult};

/// Opaque payload carried between components.
pub type Payload = serde_json::Value;
pub type Item = TimedItem<Payload>;
pub type Stream = TimedStream<Payload>;

/// A component's behaviour: `(state, tick, inputs) -> (state', outputs)`.
///
/// `inputs` holds one item per in-port. The returned vector must hold one
/// item per out-port, each tagged `tick`; the runner aborts otherwise.
pub trait StepFunction: Send + Sync + 'static {
    type State: Clone + Send + Sync + 'static;

    fn step(&self, state: Self::State, tick: TimeTag, inputs: &[Item]) -> (Self::State, Vec<Item>);
}

/// Adapts a closure into a [`StepFunction`].
pub struct FnStep<S, F> {
    f: F,
    _state: PhantomData<fn() -> S>,
}

impl<S, F> FnStep<S, F> {
    pub fn new(f: F) -> Self {
        Self { f, _state: PhantomData }
    }
}

impl<S, F> StepFunction for FnStep<S, F>
where
    S: Clone + Send + Sync + 'static,
    F: Fn(S, TimeTag, &[Item]) -> (S, Vec<Item>) + Send + Sync + 'static,
{
    type State = S;

    fn step(&self, state: S, tick: TimeTag, inputs: &[Item]) -> (S, Vec<Item>) {
        (self.f)(state, tick, inputs)
    }
}

type StateBox = Box<dyn Any + Send + Sync>;

trait DynStep: Send + Sync {
    fn initial(&self) -> StateBox;
    fn step(&self, state: &mut StateBox, tick: TimeTag, inputs: &[Item]) -> Vec<Item>;
}

struct Erased<F: StepFunction> {
    f: F,
    initial: F::State,
}

impl<F: StepFunction> DynStep for Erased<F> {
    fn initial(&self) -> StateBox {
        Box::new(Some(self.initial.clone()))
    }

    fn step(&self, state: &mut StateBox, tick: TimeTag, inputs: &[Item]) -> Vec<Item> {
        let slot = state
            .downcast_mut::<Option<F::State>>()
            .expect("state box holds the component's own state type");
        let current = slot.take().expect("state present between steps");
        let (next, out) = self.f.step(current, tick, inputs);
        *slot = Some(next);
        out
    }
}

/// A named step function with fixed port arity and an initial state.
#[derive(Clone)]
pub struct Component {
    id: String,
    in_ports: usize,
    out_ports: usize,
    step: Arc<dyn DynStep>,
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Component")
            .field("id", &self.id)
            .field("in_ports", &self.in_ports)
            .field("out_ports", &self.out_ports)
            .finish_non_exhaustive()
    }
}

impl Component {
    pub fn new<F: StepFunction>(
        id: impl Into<String>,
        in_ports: usize,
        out_ports: usize,
        step: F,
        initial_state: F::State,
    ) -> Self {
        Self {
            id: id.into(),
            in_ports,
            out_ports,
            step: Arc::new(Erased {
                f: step,
                initial: initial_state,
            }),
        }
    }

    pub fn from_fn<S, F>(id: impl Into<String>, in_ports: usize, out_ports: usize, initial_state: S, f: F) -> Self
    where
        S: Clone + Send + Sync + 'static,
        F: Fn(S, TimeTag, &[Item]) -> (S, Vec<Item>) + Send + Sync + 'static,
    {
        Self::new(id, in_ports, out_ports, FnStep::new(f), initial_state)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn in_ports(&self) -> usize {
        self.in_ports
    }

    pub fn out_ports(&self) -> usize {
        self.out_ports
    }

    fn fresh_state(&self) -> StateBox {
        self.step.initial()
    }
}

/// One port of one component.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PortRef {
    pub component: String,
    pub port: usize,
}

impl PortRef {
    pub fn new(component: impl Into<String>, port: usize) -> Self {
        Self {
            component: component.into(),
            port,
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.component, self.port)
    }
}

/// Buffered link from an out-port to an in-port. An item sent at tick `t`
/// arrives at tick `t + delay`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub from: PortRef,
    pub to: PortRef,
    pub delay: u64,
}

impl Channel {
    pub fn label(&self) -> String {
        format!("{}->{}", self.from, self.to)
    }
}

/// External stream bound to an in-port.
#[derive(Clone, Debug)]
pub struct Source {
    pub to: PortRef,
    pub stream: Stream,
}

/// Out-port whose emissions are returned as a named result stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sink {
    pub id: String,
    pub from: PortRef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortDirection {
    In,
    Out,
}

impl fmt::Display for PortDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PortDirection::In => "in",
            PortDirection::Out => "out",
        })
    }
}

/// A broken network invariant. Each variant names the offending component
/// or port.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetworkViolation {
    DuplicateComponent(String),
    UnknownComponent {
        referenced_by: String,
        id: String,
    },
    PortOutOfRange {
        port: PortRef,
        direction: PortDirection,
        arity: usize,
    },
    UnfedInPort(PortRef),
    MultiplyFedInPort {
        port: PortRef,
        feeds: usize,
    },
    ZeroDelay {
        channel: String,
    },
    DuplicateSink(String),
}

impl fmt::Display for NetworkViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkViolation::DuplicateComponent(id) => write!(f, "duplicate component id `{id}`"),
            NetworkViolation::UnknownComponent { referenced_by, id } => {
                write!(f, "{referenced_by} references unknown component `{id}`")
            }
            NetworkViolation::PortOutOfRange { port, direction, arity } => write!(
                f,
                "{direction}-port {port} out of range (component has {arity} {direction}-ports)"
            ),
            NetworkViolation::UnfedInPort(p) => write!(f, "in-port {p} has no channel or source"),
            NetworkViolation::MultiplyFedInPort { port, feeds } => {
                write!(f, "in-port {port} is fed by {feeds} writers")
            }
            NetworkViolation::ZeroDelay { channel } => {
                write!(f, "channel {channel}: delay must be ≥ 1")
            }
            NetworkViolation::DuplicateSink(id) => write!(f, "duplicate sink id `{id}`"),
        }
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("duplicate component id `{0}`")]
    DuplicateComponent(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("{direction}-port {port} out of range (component has {arity} {direction}-ports)")]
    PortOutOfRange {
        port: PortRef,
        direction: PortDirection,
        arity: usize,
    },
    #[error("in-port {0} is already fed")]
    InPortAlreadyFed(PortRef),
    #[error("delay must be ≥ 1")]
    ZeroDelay,
    #[error("duplicate sink id `{0}`")]
    DuplicateSink(String),
    #[error("invalid network: {}", join_violations(.0))]
    Invalid(Vec<NetworkViolation>),
    #[error("source stream for {port} is not dense up to {horizon}")]
    SourceNotDense { port: PortRef, horizon: TimeTag },
    #[error("component `{component}` broke the step contract at {tick}: {detail}")]
    Contract {
        component: String,
        tick: TimeTag,
        detail: String,
    },
    #[error("sink `{sink}` at {tick}: payload is not an element: {message}")]
    Decode {
        sink: String,
        tick: TimeTag,
        message: String,
    },
    #[error("unknown sink `{0}`")]
    UnknownSink(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

fn join_violations(v: &[NetworkViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Debug, Default)]
pub struct Network {
    components: Vec<Component>,
    channels: Vec<Channel>,
    sources: Vec<Source>,
    sinks: Vec<Sink>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles a network without checking anything; use
    /// [`Network::validate`] to list what is wrong with it.
    pub fn from_parts(
        components: Vec<Component>,
        channels: Vec<Channel>,
        sources: Vec<Source>,
        sinks: Vec<Sink>,
    ) -> Self {
        Self {
            components,
            channels,
            sources,
            sinks,
        }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn sinks(&self) -> &[Sink] {
        &self.sinks
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn add_component(&mut self, c: Component) -> Result<(), NetworkError> {
        if self.component(&c.id).is_some() {
            return Err(NetworkError::DuplicateComponent(c.id));
        }
        self.components.push(c);
        Ok(())
    }

    fn check_port(&self, port: &PortRef, direction: PortDirection) -> Result<(), NetworkError> {
        let c = self
            .component(&port.component)
            .ok_or_else(|| NetworkError::UnknownComponent(port.component.clone()))?;
        let arity = match direction {
            PortDirection::In => c.in_ports,
            PortDirection::Out => c.out_ports,
        };
        if port.port >= arity {
            return Err(NetworkError::PortOutOfRange {
                port: port.clone(),
                direction,
                arity,
            });
        }
        Ok(())
    }

    fn is_fed(&self, port: &PortRef) -> bool {
        self.channels.iter().any(|ch| &ch.to == port) || self.sources.iter().any(|s| &s.to == port)
    }

    pub fn connect(&mut self, from: PortRef, to: PortRef, delay: u64) -> Result<(), NetworkError> {
        self.check_port(&from, PortDirection::Out)?;
        self.check_port(&to, PortDirection::In)?;
        if self.is_fed(&to) {
            return Err(NetworkError::InPortAlreadyFed(to));
        }
        if delay < 1 {
            return Err(NetworkError::ZeroDelay);
        }
        self.channels.push(Channel { from, to, delay });
        Ok(())
    }

    /// Binds an external stream to an in-port.
    pub fn bind_source(&mut self, to: PortRef, stream: Stream) -> Result<(), NetworkError> {
        self.check_port(&to, PortDirection::In)?;
        if self.is_fed(&to) {
            return Err(NetworkError::InPortAlreadyFed(to));
        }
        self.sources.push(Source { to, stream });
        Ok(())
    }

    /// Exposes an out-port as the result stream `id`.
    pub fn expose_sink(&mut self, id: impl Into<String>, from: PortRef) -> Result<(), NetworkError> {
        let id = id.into();
        self.check_port(&from, PortDirection::Out)?;
        if self.sinks.iter().any(|s| s.id == id) {
            return Err(NetworkError::DuplicateSink(id));
        }
        self.sinks.push(Sink { id, from });
        Ok(())
    }

    /// Every broken invariant, in a fixed order. Empty iff the network can run.
    pub fn validate(&self) -> Vec<NetworkViolation> {
        let mut out = Vec::new();
        let mut arity: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for c in &self.components {
            if arity.insert(&c.id, (c.in_ports, c.out_ports)).is_some() {
                out.push(NetworkViolation::DuplicateComponent(c.id.clone()));
            }
        }

        let check = |port: &PortRef, direction: PortDirection, who: String, out: &mut Vec<_>| -> bool {
            match arity.get(port.component.as_str()) {
                None => {
                    out.push(NetworkViolation::UnknownComponent {
                        referenced_by: who,
                        id: port.component.clone(),
                    });
                    false
                }
                Some(&(ins, outs)) => {
                    let n = if direction == PortDirection::In { ins } else { outs };
                    if port.port >= n {
                        out.push(NetworkViolation::PortOutOfRange {
                            port: port.clone(),
                            direction,
                            arity: n,
                        });
                        false
                    } else {
                        true
                    }
                }
            }
        };

        let mut feeds: BTreeMap<PortRef, usize> = BTreeMap::new();
        for ch in &self.channels {
            let label = format!("channel {}", ch.label());
            check(&ch.from, PortDirection::Out, label.clone(), &mut out);
            if check(&ch.to, PortDirection::In, label, &mut out) {
                *feeds.entry(ch.to.clone()).or_default() += 1;
            }
            if ch.delay < 1 {
                out.push(NetworkViolation::ZeroDelay { channel: ch.label() });
            }
        }
        for s in &self.sources {
            if check(&s.to, PortDirection::In, format!("source for {}", s.to), &mut out) {
                *feeds.entry(s.to.clone()).or_default() += 1;
            }
        }
        let mut sink_ids = BTreeSet::new();
        for s in &self.sinks {
            check(&s.from, PortDirection::Out, format!("sink `{}`", s.id), &mut out);
            if !sink_ids.insert(s.id.as_str()) {
                out.push(NetworkViolation::DuplicateSink(s.id.clone()));
            }
        }

        let mut seen = BTreeSet::new();
        for c in &self.components {
            if !seen.insert(c.id.as_str()) {
                continue;
            }
            for port in 0..c.in_ports {
                let p = PortRef::new(c.id.clone(), port);
                match feeds.get(&p).copied().unwrap_or(0) {
                    0 => out.push(NetworkViolation::UnfedInPort(p)),
                    1 => {}
                    n => out.push(NetworkViolation::MultiplyFedInPort { port: p, feeds: n }),
                }
            }
        }
        out
    }
}
