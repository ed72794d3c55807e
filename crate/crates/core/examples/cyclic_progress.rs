//! A four-component feedback loop keeps running because every channel
//! carries exactly one item (payload or hiaton) per tick.

use settlesim::network::{run_realtime, Behavior, Network, PortRef};
use settlesim::workload::{gen_event_stream, numbered_events, WorkloadParams};
use settlesim::TimeTag;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t_end = TimeTag(10_000);
    let mut net = Network::new();
    net.add_component(Behavior::Buffer { in_ports: 2 }.component("intake")?)?;
    net.add_component(Behavior::Identity { ports: 1 }.component("match")?)?;
    net.add_component(Behavior::Identity { ports: 1 }.component("confirm")?)?;
    net.add_component(Behavior::Counter { period: 100 }.component("tally")?)?;
    net.connect(PortRef::new("intake", 0), PortRef::new("match", 0), 1)?;
    net.connect(PortRef::new("match", 0), PortRef::new("confirm", 0), 1)?;
    net.connect(PortRef::new("confirm", 0), PortRef::new("tally", 0), 1)?;
    // Closes the loop.
    net.connect(PortRef::new("tally", 0), PortRef::new("intake", 1), 1)?;

    let params = WorkloadParams {
        seed: 3,
        event_frequency: 0.1,
        ..Default::default()
    };
    let events = gen_event_stream(&params, t_end)?;
    net.bind_source(PortRef::new("intake", 0), numbered_events(&events, 0))?;

    let started = std::time::Instant::now();
    let run = run_realtime(&net, t_end)?;
    println!("ran {} ticks in {:.2?}", t_end.0 + 1, started.elapsed());
    for ch in run.channels() {
        let delivered = run.delivered(ch).unwrap();
        println!(
            "{:<26} dense={} payloads={}",
            ch.label(),
            delivered.is_dense(t_end),
            delivered.count_payloads()
        );
    }
    Ok(())
}
