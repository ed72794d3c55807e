//! Trace capture, export in both formats, re-import, summary and animation
//! frames.

use serde_json::json;
use settlesim::network::{run_realtime_with, Behavior, Network, PortRef, RunOptions};
use settlesim::trace::{animation_frames, export_trace, import_trace, summarize, ExportFormat};
use settlesim::{TimeTag, TimedItem, TimedStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t_end = TimeTag(5);
    let mut net = Network::new();
    net.add_component(Behavior::Identity { ports: 1 }.component("relay")?)?;
    net.add_component(Behavior::Buffer { in_ports: 1 }.component("desk")?)?;
    net.connect(PortRef::new("relay", 0), PortRef::new("desk", 0), 2)?;
    let input = TimedStream::new(vec![
        TimedItem::payload(0, json!({ "id": "e1" })),
        TimedItem::payload(1, json!({ "id": "e2" })),
    ])?;
    net.bind_source(PortRef::new("relay", 0), input.densify(t_end)?)?;

    let run = run_realtime_with(&net, t_end, RunOptions { inline_payloads: true })?;

    let mut ndjson = Vec::new();
    export_trace(run.trace(), ExportFormat::Ndjson, &mut ndjson)?;
    print!(
        "{}",
        String::from_utf8(ndjson.clone())?
            .lines()
            .take(3)
            .map(|l| format!("{l}\n"))
            .collect::<String>()
    );
    let mut csv = Vec::new();
    export_trace(run.trace(), ExportFormat::Csv, &mut csv)?;
    print!(
        "{}",
        String::from_utf8(csv.clone())?
            .lines()
            .take(3)
            .map(|l| format!("{l}\n"))
            .collect::<String>()
    );

    assert_eq!(&import_trace(ExportFormat::Ndjson, ndjson.as_slice())?, run.trace());
    assert_eq!(&import_trace(ExportFormat::Csv, csv.as_slice())?, run.trace());
    println!("both formats re-import to the same {} events", run.trace().len());

    let s = summarize(run.trace());
    println!(
        "payload ratio {:.3}, latency histogram {:?}",
        s.payload_ratio(),
        s.latency_histogram
    );
    for f in animation_frames(run.trace(), run.channels()) {
        println!("t{} in flight {:?}", f.tick, f.occupancy);
    }
    Ok(())
}
