//! Batch selection over a literal instance: supergroups, processing order and
//! the greedy partition.

use settlesim::partition::{build_dependency_graph, condense, select_partition, tarjan_scc, Instance};

const INSTANCE: &str = r#"{
  "elements": [
    { "id": "bond-1", "value": 500, "queue": "bonds", "refs": ["cash-1"] },
    { "id": "cash-1", "value": 480, "queue": "cash", "refs": ["bond-1"] },
    { "id": "bond-2", "value": 300, "queue": "bonds" },
    { "id": "cash-2", "value": 120, "queue": "cash" },
    { "id": "fx-1", "value": 700, "queue": "fx" }
  ],
  "system": {
    "queues": [
      { "id": "bonds", "members": ["bond-1", "bond-2"] },
      { "id": "cash", "members": ["cash-1", "cash-2"] },
      { "id": "fx", "members": ["fx-1"] }
    ],
    "queue_precedence": [["fx", "bonds"]]
  },
  "groups": [
    { "id": "securities", "queues": ["bonds", "fx"], "rule": "value_priority" },
    { "id": "payments", "queues": ["cash"], "rule": "fifo_strict" }
  ],
  "constraints": [
    { "type": "requires", "a": "bond-2", "b": "cash-2" },
    { "type": "capacity", "resource": "cash", "usage": { "cash-1": 480, "cash-2": 120 }, "bound": 550 }
  ]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst: Instance = serde_json::from_str(INSTANCE)?;
    inst.ensure_valid()?;

    let order: Vec<String> = inst.processing_order().iter().map(ToString::to_string).collect();
    println!("processing order: {}", order.join(", "));

    let graph = build_dependency_graph(&inst.elements, &inst.constraints)?;
    let sccs = tarjan_scc(&graph);
    let dag = condense(&graph, &sccs);
    let ranks = dag.ranks();
    for s in &sccs {
        let ids: Vec<String> = s.members.iter().map(ToString::to_string).collect();
        println!("supergroup {} (rank {}): {}", s.id, ranks[s.id], ids.join(" + "));
    }

    let p = select_partition(&inst)?;
    println!(
        "accepted: {:?}",
        p.accepted.iter().map(ToString::to_string).collect::<Vec<_>>()
    );
    println!(
        "rejected: {:?}",
        p.rejected.iter().map(ToString::to_string).collect::<Vec<_>>()
    );
    println!("aggregate {} with {} violations", p.aggregate, p.violations.len());
    Ok(())
}
