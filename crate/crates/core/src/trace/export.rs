use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use super::{Direction, ItemKind, Trace, TraceError, TraceEvent};
use crate::digest::{from_hex, to_hex};

const CSV_HEADER: [&str; 7] = ["tick", "comp", "port", "dir", "kind", "digest", "payload"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Ndjson,
    Csv,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Ndjson => "ndjson",
            ExportFormat::Csv => "csv",
        }
    }

    /// Format implied by a file extension (`.ndjson`, `.jsonl`, `.csv`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "ndjson" | "jsonl" => Some(ExportFormat::Ndjson),
            "csv" => Some(ExportFormat::Csv),
            _ => None,
        }
    }
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ndjson" => Ok(ExportFormat::Ndjson),
            "csv" => Ok(ExportFormat::Csv),
            _ => Err(format!("unknown trace format `{s}` (expected ndjson or csv)")),
        }
    }
}

// `payload: null` is a present null payload, not an absent one.
fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    tick: u64,
    comp: String,
    port: usize,
    dir: Direction,
    kind: ItemKind,
    digest: String,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    payload: Option<Value>,
}

impl From<&TraceEvent> for Record {
    fn from(e: &TraceEvent) -> Self {
        Record {
            tick: e.tick,
            comp: e.comp.to_string(),
            port: e.port,
            dir: e.dir,
            kind: e.kind,
            digest: to_hex(e.digest),
            payload: e.payload.clone(),
        }
    }
}

impl Record {
    fn into_event(self, record: usize) -> Result<TraceEvent, TraceError> {
        let digest = from_hex(&self.digest).ok_or_else(|| TraceError::Malformed {
            record,
            message: format!("digest `{}` is not 16 hex digits", self.digest),
        })?;
        Ok(TraceEvent {
            tick: self.tick,
            comp: self.comp.into(),
            port: self.port,
            dir: self.dir,
            kind: self.kind,
            digest,
            payload: self.payload,
        })
    }
}

fn label(v: impl Serialize) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => unreachable!("unit enum variants serialize as strings"),
    }
}

/// Writes `trace` as ND-JSON (one object per line) or CSV with a header row.
pub fn export_trace<W: Write>(trace: &Trace, format: ExportFormat, out: W) -> Result<(), TraceError> {
    match format {
        ExportFormat::Ndjson => {
            let mut out = BufWriter::new(out);
            for e in trace.events() {
                serde_json::to_writer(&mut out, &Record::from(e)).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER).map_err(csv_io)?;
            for e in trace.events() {
                let payload = match &e.payload {
                    Some(v) => v.to_string(),
                    None => String::new(),
                };
                w.write_record([
                    e.tick.to_string(),
                    e.comp.to_string(),
                    e.port.to_string(),
                    label(e.dir),
                    label(e.kind),
                    to_hex(e.digest),
                    payload,
                ])
                .map_err(csv_io)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn csv_io(e: csv::Error) -> TraceError {
    TraceError::Io(e.into())
}

pub fn export_trace_to_path(trace: &Trace, format: ExportFormat, path: &Path) -> Result<(), TraceError> {
    export_trace(trace, format, File::create(path)?)
}

fn parse_field<T: FromStr>(record: usize, name: &str, raw: &str) -> Result<T, TraceError> {
    raw.parse().map_err(|_| TraceError::Malformed {
        record,
        message: format!("bad {name} `{raw}`"),
    })
}

fn parse_label<T: for<'de> Deserialize<'de>>(record: usize, name: &str, raw: &str) -> Result<T, TraceError> {
    serde_json::from_value(Value::String(raw.to_owned())).map_err(|_| TraceError::Malformed {
        record,
        message: format!("bad {name} `{raw}`"),
    })
}

/// Reads a trace back. Records are numbered from 1; the CSV header is not
/// counted. Event order is checked as on recording.
pub fn import_trace<R: Read>(format: ExportFormat, input: R) -> Result<Trace, TraceError> {
    let mut events = Vec::new();
    match format {
        ExportFormat::Ndjson => {
            for (i, line) in BufReader::new(input).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: Record = serde_json::from_str(&line).map_err(|e| TraceError::Malformed {
                    record: i + 1,
                    message: e.to_string(),
                })?;
                events.push(rec.into_event(i + 1)?);
            }
        }
        ExportFormat::Csv => {
            let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
            let header = r.headers().map_err(|e| TraceError::Malformed {
                record: 0,
                message: e.to_string(),
            })?;
            if header.iter().ne(CSV_HEADER) {
                return Err(TraceError::Malformed {
                    record: 0,
                    message: format!("expected header {}", CSV_HEADER.join(",")),
                });
            }
            for (i, row) in r.records().enumerate() {
                let n = i + 1;
                let row = row.map_err(|e| TraceError::Malformed {
                    record: n,
                    message: e.to_string(),
                })?;
                let payload = match &row[6] {
                    "" => None,
                    raw => Some(serde_json::from_str(raw).map_err(|e| TraceError::Malformed {
                        record: n,
                        message: format!("payload: {e}"),
                    })?),
                };
                let rec = Record {
                    tick: parse_field(n, "tick", &row[0])?,
                    comp: row[1].to_owned(),
                    port: parse_field(n, "port", &row[2])?,
                    dir: parse_label(n, "dir", &row[3])?,
                    kind: parse_label(n, "kind", &row[4])?,
                    digest: row[5].to_owned(),
                    payload,
                };
                events.push(rec.into_event(n)?);
            }
        }
    }
    Trace::from_events(events)
}

/// Reads a trace file; without an explicit format the extension decides.
pub fn import_trace_from_path(path: &Path, format: Option<ExportFormat>) -> Result<Trace, TraceError> {
    let format = match format.or_else(|| ExportFormat::from_path(path)) {
        Some(f) => f,
        None => {
            return Err(TraceError::Malformed {
                record: 0,
                message: format!("cannot tell the format of {}; pass it explicitly", path.display()),
            })
        }
    };
    import_trace(format, File::open(path)?)
}
