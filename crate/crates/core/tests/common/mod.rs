//! Independent reference implementations and input generators shared by the
//! integration tests and the acceptance runner.

#![allow(dead_code)]

use std::collections::BTreeSet;

use settlesim::partition::{Constraint, ElementId, Instance, Partition, RuleKind};
use settlesim::workload::{gen_elements, CapacitySpec, RngState, WorkloadParams};

/// Transitive closure by Floyd–Warshall; `reach[i][j]` iff a path of length
/// ≥ 0 leads from `i` to `j`.
pub fn reachability(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        r[a][b] = true;
    }
    for k in 0..n {
        let via = r[k].clone();
        for row in r.iter_mut() {
            if row[k] {
                for (j, &reach) in via.iter().enumerate() {
                    if reach {
                        row[j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Constraint check written from the definitions, independent of the crate's
/// own checker. Returns a count of violated constraints.
pub fn count_violations(accepted: &BTreeSet<ElementId>, constraints: &[Constraint]) -> usize {
    let mut bad = 0;
    for c in constraints {
        let violated = match c {
            Constraint::Requires { a, b } => accepted.contains(a) && !accepted.contains(b),
            Constraint::Excludes { a, b } => accepted.contains(a) && accepted.contains(b),
            Constraint::Capacity { usage, bound, .. } => {
                let mut used: i128 = 0;
                for id in accepted {
                    if let Some(&u) = usage.get(id) {
                        used += u as i128;
                    }
                }
                used > *bound as i128
            }
        };
        if violated {
            bad += 1;
        }
    }
    bad
}

/// Element sets that must be accepted or rejected together: classes of the
/// mutual-reachability relation over refs and `Requires` edges.
pub fn mutual_classes(inst: &Instance) -> Vec<BTreeSet<ElementId>> {
    let ids: Vec<&ElementId> = inst.elements.iter().map(|e| &e.id).collect();
    let idx = |id: &ElementId| ids.iter().position(|x| *x == id).unwrap();
    let mut edges = Vec::new();
    for e in &inst.elements {
        for r in &e.refs {
            edges.push((idx(&e.id), idx(r)));
        }
    }
    for c in &inst.constraints {
        if let Constraint::Requires { a, b } = c {
            edges.push((idx(a), idx(b)));
        }
    }
    let reach = reachability(ids.len(), &edges);
    let mut seen = vec![false; ids.len()];
    let mut out = Vec::new();
    for i in 0..ids.len() {
        if seen[i] {
            continue;
        }
        let class: BTreeSet<ElementId> = (0..ids.len())
            .filter(|&j| reach[i][j] && reach[j][i])
            .map(|j| {
                seen[j] = true;
                ids[j].clone()
            })
            .collect();
        out.push(class);
    }
    out
}

pub fn split_classes(p: &Partition, classes: &[BTreeSet<ElementId>]) -> usize {
    classes
        .iter()
        .filter(|c| {
            let k = c.iter().filter(|id| p.accepted.contains(*id)).count();
            k != 0 && k != c.len()
        })
        .count()
}

/// A random instance of at most `max_elements` elements with every kind of
/// structure switched on, drawn from `seed`.
pub fn fuzzed_instance(seed: u64, max_elements: usize, all_or_nothing: bool) -> Instance {
    let mut rng = RngState::new(seed ^ 0x5eed);
    let pick = |rng: &mut RngState, hi: u64| rng.below(hi) as f64 / 10.0;
    let mut groups = vec![RuleKind::ValuePriority, RuleKind::FifoStrict];
    if all_or_nothing {
        groups.push(RuleKind::AllOrNothingGroup);
    }
    let rotate = rng.below(groups.len() as u64) as usize;
    groups.rotate_left(rotate);
    let params = WorkloadParams {
        seed,
        element_count: 1 + rng.below(max_elements as u64) as usize,
        value_range: (1, 1 + rng.below(1000) as i64),
        ref_density: pick(&mut rng, 15),
        queue_count: 1 + rng.below(4) as usize,
        groups,
        queue_precedence_density: pick(&mut rng, 6),
        member_precedence_density: pick(&mut rng, 6),
        requires_density: pick(&mut rng, 6),
        excludes_density: pick(&mut rng, 4),
        capacities: (0..rng.below(3))
            .map(|k| CapacitySpec {
                resource: format!("r{k}"),
                bound_fraction: pick(&mut rng, 10),
            })
            .collect(),
        ..Default::default()
    };
    gen_elements(&params).expect("fuzz parameters are valid")
}
