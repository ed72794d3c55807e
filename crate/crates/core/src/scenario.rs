//! Scenario files and the operations behind the command-line tool.
//!
//! A scenario is a JSON document naming an execution mode, a seed, a time
//! horizon and the inputs: a generated workload or a literal batch instance,
//! plus a component network for real-time runs.
//!
//! ```json
//! {
//!   "name": "demo",
//!   "mode": "both",
//!   "seed": 7,
//!   "t_end": 99,
//!   "workload": { "element_count": 12, "event_frequency": 0.3 },
//!   "network": {
//!     "components": [ { "id": "desk", "behavior": { "type": "buffer", "in_ports": 1 } } ],
//!     "channels": [],
//!     "sources": [ { "to": ["desk", 0], "kind": "elements" } ],
//!     "sinks": [ { "id": "out", "from": ["desk", 0] } ]
//!   }
//! }
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::digest::{fnv1a, to_hex};
use crate::network::{
    drain, run_realtime_with, Behavior, Channel, Network, NetworkError, PortRef, RunOptions, RunResult, Sink, Source,
    Stream,
};
use crate::partition::{
    build_dependency_graph, exhaustive_oracle, select_partition, tarjan_scc, Element, ElementId, Instance, Partition,
    PartitionError,
};
use crate::timed_streams::{TimeTag, TimedItem, TimedStream};
use crate::trace::{
    animation_frames, export_trace_to_path, import_trace_from_path, summarize, ExportFormat, Summary, TraceError,
};
use crate::workload::{
    element_arrivals, gen_elements, gen_event_stream_for, numbered_events, WorkloadError, WorkloadParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Realtime,
    Batch,
    Both,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "realtime" => Ok(Mode::Realtime),
            "batch" => Ok(Mode::Batch),
            "both" => Ok(Mode::Both),
            _ => Err(format!("unknown mode `{s}` (expected realtime, batch or both)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Realtime => "realtime",
            Mode::Batch => "batch",
            Mode::Both => "both",
        })
    }
}

fn one() -> u64 {
    1
}

fn default_formats() -> Vec<ExportFormat> {
    vec![ExportFormat::Ndjson]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub id: String,
    pub behavior: Behavior,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub from: (String, usize),
    pub to: (String, usize),
    #[serde(default = "one")]
    pub delay: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// Workload elements, one per generated event.
    Elements,
    /// Generated events `{"source": i, "seq": n}`.
    Events,
    /// Literal items from the scenario.
    Inline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineItem {
    pub tick: u64,
    pub payload: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub to: (String, usize),
    pub kind: SourceKind,
    /// Overrides the workload's event frequency for this source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<InlineItem>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkSpec {
    pub id: String,
    pub from: (String, usize),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub sinks: Vec<SinkSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    /// Last tick of a real-time run.
    #[serde(default)]
    pub t_end: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<WorkloadParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Instance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSpec>,
    /// Trace file formats to write.
    #[serde(default = "default_formats")]
    pub formats: Vec<ExportFormat>,
    /// Keep payload values in the trace, not only digests.
    #[serde(default)]
    pub inline_payloads: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Command-line settings that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub t_end: Option<u64>,
    pub mode: Option<Mode>,
    pub format: Option<ExportFormat>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{}:{line}:{column}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("output directory {} already exists", .0.display())]
    OutputExists(PathBuf),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

fn field(field: impl Into<String>, message: impl fmt::Display) -> ScenarioError {
    ScenarioError::Field {
        field: field.into(),
        message: message.to_string(),
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn workload_err(e: WorkloadError) -> ScenarioError {
    field("workload", e)
}

/// Parses a scenario from JSON text; `path` is only used in messages.
pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario, ScenarioError> {
    let sc: Scenario = serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let message = match full.rsplit_once(" at line ") {
            Some((m, _)) => m.to_owned(),
            None => full,
        };
        ScenarioError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message,
        }
    })?;
    sc.check()?;
    Ok(sc)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    parse_scenario(&text, path)
}

impl Scenario {
    /// Applies overrides and re-checks the result.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self, ScenarioError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.t_end {
            self.t_end = t;
        }
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(f) = o.format {
            self.formats = vec![f];
        }
        self.check()?;
        Ok(self)
    }

    /// Static checks; the first problem found is reported with its field path.
    pub fn check(&self) -> Result<(), ScenarioError> {
        let name_ok = !self.name.is_empty()
            && !self.name.starts_with('.')
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if !name_ok {
            return Err(field("name", "use letters, digits, `-`, `_` or `.` (not leading)"));
        }
        if self.formats.is_empty() {
            return Err(field("formats", "name at least one trace format"));
        }
        if self.workload.is_some() && self.instance.is_some() {
            return Err(field("workload", "give either a workload or an instance, not both"));
        }
        let needs_batch = matches!(self.mode, Mode::Batch | Mode::Both);
        if needs_batch && self.workload.is_none() && self.instance.is_none() {
            return Err(field(
                "workload",
                format!("{} mode needs a workload or an instance", self.mode),
            ));
        }
        if let Some(w) = &self.workload {
            w.validate().map_err(workload_err)?;
        }
        if let Some(inst) = &self.instance {
            let v = inst.validate();
            if !v.is_empty() {
                return Err(field("instance", PartitionError::Invalid(v)));
            }
        }
        if matches!(self.mode, Mode::Realtime | Mode::Both) {
            let net = self
                .network
                .as_ref()
                .ok_or_else(|| field("network", format!("{} mode needs a network", self.mode)))?;
            self.check_network(net)?;
        }
        Ok(())
    }

    fn check_network(&self, net: &NetworkSpec) -> Result<(), ScenarioError> {
        for (i, c) in net.components.iter().enumerate() {
            c.behavior
                .check()
                .map_err(|e| field(format!("network.components[{i}].behavior"), e))?;
        }
        for (i, s) in net.sources.iter().enumerate() {
            let at = |f: &str| format!("network.sources[{i}].{f}");
            match s.kind {
                SourceKind::Inline => {
                    if s.event_frequency.is_some() {
                        return Err(field(at("event_frequency"), "not used by inline sources"));
                    }
                    let mut prev: Option<u64> = None;
                    for (j, item) in s.items.iter().enumerate() {
                        if prev.is_some_and(|p| p >= item.tick) {
                            return Err(field(at(&format!("items[{j}].tick")), "ticks must increase"));
                        }
                        if item.tick > self.t_end {
                            return Err(field(
                                at(&format!("items[{j}].tick")),
                                format!("tick {} is beyond t_end {}", item.tick, self.t_end),
                            ));
                        }
                        prev = Some(item.tick);
                    }
                }
                SourceKind::Elements | SourceKind::Events => {
                    if !s.items.is_empty() {
                        return Err(field(at("items"), "only inline sources take items"));
                    }
                    if let Some(f) = s.event_frequency {
                        if !(0.0..=1.0).contains(&f) {
                            return Err(field(at("event_frequency"), format!("must lie in [0, 1], got {f}")));
                        }
                    } else if self.workload.is_none() {
                        return Err(field(at("event_frequency"), "required when there is no workload"));
                    }
                    if s.kind == SourceKind::Elements && self.workload.is_none() && self.instance.is_none() {
                        return Err(field(at("kind"), "element sources need a workload or an instance"));
                    }
                }
            }
        }
        Ok(())
    }

    /// The batch instance, generated or literal.
    pub fn instance(&self) -> Result<Option<Instance>, ScenarioError> {
        if let Some(inst) = &self.instance {
            return Ok(Some(inst.clone()));
        }
        match &self.workload {
            Some(w) => Ok(Some(gen_elements(&self.workload_params(w)).map_err(workload_err)?)),
            None => Ok(None),
        }
    }

    fn workload_params(&self, w: &WorkloadParams) -> WorkloadParams {
        WorkloadParams {
            seed: self.seed,
            ..w.clone()
        }
    }

    fn event_params(&self, s: &SourceSpec) -> WorkloadParams {
        let mut p = match &self.workload {
            Some(w) => self.workload_params(w),
            None => WorkloadParams {
                seed: self.seed,
                ..WorkloadParams::default()
            },
        };
        if let Some(f) = s.event_frequency {
            p.event_frequency = f;
        }
        p
    }

    /// Assembles the network; element sources draw on `elements`.
    pub fn network(&self, elements: &[Element]) -> Result<Network, ScenarioError> {
        let spec = self.network.clone().unwrap_or_default();
        let horizon = TimeTag(self.t_end);
        let mut components = Vec::with_capacity(spec.components.len());
        for (i, c) in spec.components.into_iter().enumerate() {
            components.push(
                c.behavior
                    .component(c.id)
                    .map_err(|e| field(format!("network.components[{i}].behavior"), e))?,
            );
        }
        let channels = spec
            .channels
            .into_iter()
            .map(|c| Channel {
                from: PortRef::new(c.from.0, c.from.1),
                to: PortRef::new(c.to.0, c.to.1),
                delay: c.delay,
            })
            .collect();
        let element_sources = spec.sources.iter().filter(|s| s.kind == SourceKind::Elements).count();
        let mut next_element_source = 0;
        let mut sources = Vec::with_capacity(spec.sources.len());
        for (i, s) in spec.sources.iter().enumerate() {
            let stream: Stream = match s.kind {
                SourceKind::Inline => {
                    let items = s
                        .items
                        .iter()
                        .map(|it| TimedItem::payload(it.tick, it.payload.clone()))
                        .collect();
                    TimedStream::new(items)
                        .and_then(|st| st.densify(horizon))
                        .map_err(|e| field(format!("network.sources[{i}].items"), e))?
                }
                SourceKind::Events | SourceKind::Elements => {
                    let events = gen_event_stream_for(&self.event_params(s), i as u64, horizon)
                        .map_err(|e| field(format!("network.sources[{i}]"), e))?;
                    if s.kind == SourceKind::Events {
                        numbered_events(&events, i as u64)
                    } else {
                        let j = next_element_source;
                        next_element_source += 1;
                        let mine: Vec<Element> = elements.iter().skip(j).step_by(element_sources).cloned().collect();
                        element_arrivals(&events, &mine)
                    }
                }
            };
            sources.push(Source {
                to: PortRef::new(s.to.0.clone(), s.to.1),
                stream,
            });
        }
        let sinks = spec
            .sinks
            .into_iter()
            .map(|s| Sink {
                id: s.id,
                from: PortRef::new(s.from.0, s.from.1),
            })
            .collect();
        let net = Network::from_parts(components, channels, sources, sinks);
        let violations = net.validate();
        if !violations.is_empty() {
            return Err(field("network", NetworkError::Invalid(violations)));
        }
        Ok(net)
    }

    /// Canonical JSON of the effective scenario, without the output location.
    pub fn canonical_json(&self) -> String {
        let sc = Scenario {
            output_dir: None,
            ..self.clone()
        };
        serde_json::to_string(&sc).expect("scenario serializes")
    }

    /// `<name>-<16 hex digits>-s<seed>`; equal effective scenarios share it.
    pub fn run_dir_name(&self) -> String {
        format!(
            "{}-{}-s{}",
            self.name,
            to_hex(fnv1a(self.canonical_json().as_bytes())),
            self.seed
        )
    }
}

/// Batch result as written to `partition.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionReport {
    #[serde(flatten)]
    pub partition: Partition,
    /// Supergroups with more than one member.
    pub supergroups: Vec<Vec<ElementId>>,
}

impl PartitionReport {
    pub fn new(inst: &Instance, partition: Partition) -> Result<Self, ScenarioError> {
        let g = build_dependency_graph(&inst.elements, &inst.constraints)?;
        let supergroups = tarjan_scc(&g)
            .into_iter()
            .filter(|s| s.members.len() > 1)
            .map(|s| s.members)
            .collect();
        Ok(Self { partition, supergroups })
    }
}

/// What [`run_scenario`] produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: Option<Summary>,
    pub partition: Option<Partition>,
}

/// Elements drained in both mode, reduced to the instance's own records.
/// Repeated ids keep their first delivery.
pub fn drained_instance(inst: &Instance, drained: &[Element]) -> Result<Instance, ScenarioError> {
    let mut keep = BTreeSet::new();
    for e in drained {
        if inst.element(&e.id).is_none() {
            return Err(ScenarioError::Partition(PartitionError::UnknownElement(e.id.clone())));
        }
        keep.insert(e.id.clone());
    }
    Ok(inst.restrict_to(&keep))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), ScenarioError> {
    let mut text = serde_json::to_string_pretty(v).expect("output serializes");
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

/// Builds everything in a scratch directory next to the target and renames
/// it into place, so a failed run leaves no partial output behind.
fn publish(
    out_root: &Path,
    name: &str,
    build: impl FnOnce(&Path) -> Result<(), ScenarioError>,
) -> Result<PathBuf, ScenarioError> {
    fs::create_dir_all(out_root).map_err(io(out_root))?;
    let dir = out_root.join(name);
    if dir.exists() {
        return Err(ScenarioError::OutputExists(dir));
    }
    let tmp = out_root.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io(&tmp))?;
    }
    fs::create_dir(&tmp).map_err(io(&tmp))?;
    let result = build(&tmp).and_then(|()| {
        if dir.exists() {
            return Err(ScenarioError::OutputExists(dir.clone()));
        }
        fs::rename(&tmp, &dir).map_err(io(&dir))
    });
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result.map(|()| dir)
}

fn write_realtime(dir: &Path, sc: &Scenario, run: &RunResult) -> Result<Summary, ScenarioError> {
    for &f in &sc.formats {
        export_trace_to_path(run.trace(), f, &dir.join(format!("trace.{}", f.extension())))?;
    }
    let summary = summarize(run.trace());
    write_json(&dir.join("summary.json"), &summary)?;
    let path = dir.join("frames.ndjson");
    let file = fs::File::create(&path).map_err(io(&path))?;
    let mut w = std::io::BufWriter::new(file);
    for frame in animation_frames(run.trace(), run.channels()) {
        serde_json::to_writer(&mut w, &frame).expect("frame serializes");
        w.write_all(b"\n").map_err(io(&path))?;
    }
    w.flush().map_err(io(&path))?;
    Ok(summary)
}

/// Executes the scenario and writes its outputs under
/// `out_root/<run dir name>`.
///
/// * `scenario.json`: the effective scenario.
/// * real-time and both: `trace.<fmt>` per format, `summary.json`,
///   `frames.ndjson`.
/// * batch and both: `instance.json` (the partitioned instance) and
///   `partition.json`.
pub fn run_scenario(sc: &Scenario, out_root: &Path) -> Result<RunOutcome, ScenarioError> {
    let name = sc.run_dir_name();
    let mut summary = None;
    let mut partition = None;
    let dir = publish(out_root, &name, |dir| {
        write_json(&dir.join("scenario.json"), sc)?;
        let inst = sc.instance()?;
        let batch_input = match sc.mode {
            Mode::Batch => inst,
            Mode::Realtime | Mode::Both => {
                let elements = inst.as_ref().map_or(&[][..], |i| &i.elements[..]);
                let net = sc.network(elements)?;
                let run = run_realtime_with(
                    &net,
                    TimeTag(sc.t_end),
                    RunOptions {
                        inline_payloads: sc.inline_payloads,
                    },
                )?;
                summary = Some(write_realtime(dir, sc, &run)?);
                match (sc.mode, inst) {
                    (Mode::Both, Some(inst)) => Some(drained_instance(&inst, &drain(&run)?)?),
                    _ => None,
                }
            }
        };
        if let Some(inst) = batch_input {
            let p = select_partition(&inst)?;
            write_json(&dir.join("instance.json"), &inst)?;
            write_json(&dir.join("partition.json"), &PartitionReport::new(&inst, p.clone())?)?;
            partition = Some(p);
        }
        Ok(())
    })?;
    Ok(RunOutcome {
        dir,
        summary,
        partition,
    })
}

/// Writes the generated inputs of a scenario under
/// `out_root/<run dir name>-gen`: `instance.json` when a batch instance is
/// defined and `events.ndjson` with one line per tick of every generated
/// source, `{"source", "tick", "payload"}` (`payload` absent for hiatons).
pub fn generate(sc: &Scenario, out_root: &Path) -> Result<PathBuf, ScenarioError> {
    if sc.workload.is_none() {
        return Err(field("workload", "gen needs a workload"));
    }
    let name = format!("{}-gen", sc.run_dir_name());
    publish(out_root, &name, |dir| {
        write_json(&dir.join("scenario.json"), sc)?;
        let inst = sc.instance()?.unwrap_or_default();
        write_json(&dir.join("instance.json"), &inst)?;
        let path = dir.join("events.ndjson");
        let file = fs::File::create(&path).map_err(io(&path))?;
        let mut w = std::io::BufWriter::new(file);
        let sources: Vec<SourceSpec> = match &sc.network {
            Some(n) => n.sources.clone(),
            None => vec![SourceSpec {
                to: (String::new(), 0),
                kind: SourceKind::Events,
                event_frequency: None,
                items: Vec::new(),
            }],
        };
        for (i, s) in sources.iter().enumerate() {
            if s.kind == SourceKind::Inline {
                continue;
            }
            let events = gen_event_stream_for(&sc.event_params(s), i as u64, TimeTag(sc.t_end))
                .map_err(|e| field(format!("network.sources[{i}]"), e))?;
            for item in &events {
                let mut line = json!({"source": i, "tick": item.tag().0});
                if let Some(v) = item.value() {
                    line["payload"] = json!(v);
                }
                serde_json::to_writer(&mut w, &line).expect("event serializes");
                w.write_all(b"\n").map_err(io(&path))?;
            }
        }
        w.flush().map_err(io(&path))?;
        Ok(())
    })
}

/// Greedy versus exhaustive selection on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub elements: usize,
    pub greedy_aggregate: i64,
    pub oracle_aggregate: i64,
    /// `greedy / oracle`, or 1 when the optimum is 0.
    pub ratio: f64,
    pub greedy: Partition,
    pub oracle: Partition,
}

pub fn compare_with_oracle(inst: &Instance) -> Result<GapReport, ScenarioError> {
    let greedy = select_partition(inst)?;
    let oracle = exhaustive_oracle(inst)?;
    let ratio = if oracle.aggregate == 0 {
        1.0
    } else {
        greedy.aggregate as f64 / oracle.aggregate as f64
    };
    Ok(GapReport {
        elements: inst.elements.len(),
        greedy_aggregate: greedy.aggregate,
        oracle_aggregate: oracle.aggregate,
        ratio,
        greedy,
        oracle,
    })
}

pub fn compare_scenario(sc: &Scenario) -> Result<GapReport, ScenarioError> {
    let inst = sc
        .instance()?
        .ok_or_else(|| field("workload", "compare needs a workload or an instance"))?;
    compare_with_oracle(&inst)
}

/// Summary of a trace file; the format comes from `format` or the extension.
pub fn summarize_file(path: &Path, format: Option<ExportFormat>) -> Result<Summary, ScenarioError> {
    if !path.exists() {
        return Err(ScenarioError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        });
    }
    Ok(summarize(&import_trace_from_path(path, format)?))
}
