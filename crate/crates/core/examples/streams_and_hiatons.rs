//! Timed streams: payloads, hiatons, merging and shifting.

use settlesim::{make_hiaton, merge, TimeTag, TimedItem, TimedStream};

fn show(label: &str, s: &TimedStream<&str>) {
    let items: Vec<String> = s
        .items()
        .iter()
        .map(|i| match i {
            TimedItem::Payload { tag, value } => format!("{tag}:{value}"),
            TimedItem::Hiaton { tag } => format!("{tag}:-"),
        })
        .collect();
    println!("{label:>10}  {}", items.join(" "));
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trades = TimedStream::new(vec![
        TimedItem::payload(0, "buy"),
        make_hiaton(1),
        TimedItem::payload(3, "sell"),
    ])?;
    let cash = TimedStream::new(vec![TimedItem::payload(1, "pay"), TimedItem::payload(3, "recv")])?;

    show("trades", &trades);
    show("cash", &cash);

    // On equal tags the left stream wins.
    let merged = merge(trades.items(), cash.items())?;
    show("merged", &merged);

    let dense = trades.clone().densify(TimeTag(5))?;
    show("dense", &dense);
    println!(
        "{:>10}  {} payloads, {} hiatons",
        "",
        dense.count_payloads(),
        dense.count_hiatons()
    );

    show("stripped", &dense.strip_hiatons());
    show("shift(+2)", &trades.shift(2));

    // Streams must be time-ordered.
    let err = TimedStream::new(vec![TimedItem::payload(2, "x"), TimedItem::payload(1, "y")]).unwrap_err();
    println!("rejected: {err}");
    Ok(())
}
