//! A small settlement pipeline: a custom matching step between two stock
//! behaviours, run for 30 ticks.

use serde_json::json;
use settlesim::network::{run_realtime, Behavior, Component, Item, Network, PortRef};
use settlesim::trace::summarize;
use settlesim::{make_hiaton, TimeTag, TimedItem, TimedStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut net = Network::new();
    net.add_component(Behavior::Buffer { in_ports: 2 }.component("intake")?)?;
    // Pairs up consecutive instructions; state is the unmatched one.
    net.add_component(Component::from_fn(
        "matcher",
        1,
        1,
        None::<serde_json::Value>,
        |pending, tick: TimeTag, inputs: &[Item]| match (&inputs[0], pending) {
            (TimedItem::Payload { value, .. }, None) => (Some(value.clone()), vec![make_hiaton(tick)]),
            (TimedItem::Payload { value, .. }, Some(first)) => {
                let pair = json!({ "pair": [first, value] });
                (None, vec![TimedItem::payload(tick, pair)])
            }
            (TimedItem::Hiaton { .. }, pending) => (pending, vec![make_hiaton(tick)]),
        },
    ))?;
    net.add_component(Behavior::Counter { period: 10 }.component("ledger")?)?;

    net.connect(PortRef::new("intake", 0), PortRef::new("matcher", 0), 1)?;
    net.connect(PortRef::new("matcher", 0), PortRef::new("ledger", 0), 2)?;

    let horizon = TimeTag(29);
    let buys = TimedStream::new((0..6).map(|i| TimedItem::payload(i * 4, json!({ "buy": i }))).collect())?;
    let sells = TimedStream::new(
        (0..6)
            .map(|i| TimedItem::payload(i * 4 + 1, json!({ "sell": i })))
            .collect(),
    )?;
    net.bind_source(PortRef::new("intake", 0), buys.densify(horizon)?)?;
    net.bind_source(PortRef::new("intake", 1), sells.densify(horizon)?)?;
    net.expose_sink("pairs", PortRef::new("matcher", 0))?;
    net.expose_sink("tally", PortRef::new("ledger", 0))?;

    let run = run_realtime(&net, horizon)?;
    for item in run.sink("pairs").unwrap() {
        if let TimedItem::Payload { tag, value } = item {
            println!("{tag} matched {value}");
        }
    }
    for item in run.sink("tally").unwrap().strip_hiatons().items() {
        println!("{} ledger count {}", item.tag(), item.value().unwrap()["count"]);
    }

    let s = summarize(run.trace());
    println!("{} trace events over {} ticks", s.events, s.ticks);
    for (comp, c) in &s.components {
        println!(
            "  {comp:<8} in {:>2} payloads, out {:>2} payloads",
            c.consumed_payloads, c.emitted_payloads
        );
    }
    Ok(())
}
