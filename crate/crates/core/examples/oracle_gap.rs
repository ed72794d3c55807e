//! Greedy selection against the exhaustive optimum: the capacity example
//! where taking the biggest element first loses, plus a small random sweep.

use std::collections::BTreeMap;

use settlesim::partition::{Constraint, Element, Instance, Queue, QueueGroup, QueueSystem, RuleKind};
use settlesim::scenario::compare_with_oracle;
use settlesim::workload::{gen_elements, CapacitySpec, WorkloadParams};

fn capacity_gap() -> Instance {
    let values = [("a", 4), ("b", 3), ("c", 2)];
    let elements: Vec<Element> = values
        .iter()
        .map(|&(id, value)| Element {
            id: id.into(),
            value,
            queue: "q".into(),
            refs: vec![],
        })
        .collect();
    Instance {
        system: QueueSystem {
            queues: vec![Queue {
                id: "q".into(),
                members: elements.iter().map(|e| e.id.clone()).collect(),
                precedence: vec![],
            }],
            queue_precedence: vec![],
        },
        groups: vec![QueueGroup {
            id: "g".into(),
            queues: vec!["q".into()],
            rule: RuleKind::ValuePriority,
        }],
        constraints: vec![Constraint::Capacity {
            resource: "liquidity".into(),
            usage: values.iter().map(|&(id, v)| (id.into(), v)).collect::<BTreeMap<_, _>>(),
            bound: 5,
        }],
        elements,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = compare_with_oracle(&capacity_gap())?;
    println!(
        "capacity gap: greedy {} vs oracle {} (ratio {:.2})",
        r.greedy_aggregate, r.oracle_aggregate, r.ratio
    );

    let mut worst = 1.0f64;
    for seed in 0..50 {
        let inst = gen_elements(&WorkloadParams {
            seed,
            element_count: 12,
            value_range: (1, 100),
            ref_density: 0.2,
            queue_count: 3,
            requires_density: 0.2,
            excludes_density: 0.1,
            capacities: vec![CapacitySpec {
                resource: "cash".into(),
                bound_fraction: 0.5,
            }],
            ..Default::default()
        })?;
        let r = compare_with_oracle(&inst)?;
        worst = worst.min(r.ratio);
    }
    println!("worst ratio over 50 random 12-element instances: {worst:.3}");
    Ok(())
}
