use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::graph::{build_dependency_graph, tarjan_scc};
use super::{Constraint, ElementId, Instance, Partition, PartitionError};

/// Largest instance [`exhaustive_oracle`] accepts.
pub const MAX_ORACLE_ELEMENTS: usize = 20;

/// Compares two subsets (bit `i` = `i`-th smallest id) as ascending id lists.
fn lex_cmp(mut a: u32, mut b: u32) -> Ordering {
    loop {
        match (a, b) {
            (0, 0) => return Ordering::Equal,
            (0, _) => return Ordering::Less,
            (_, 0) => return Ordering::Greater,
            _ => {}
        }
        let (x, y) = (a.trailing_zeros(), b.trailing_zeros());
        if x != y {
            return x.cmp(&y);
        }
        a &= a - 1;
        b &= b - 1;
    }
}

/// Best feasible partition by enumeration of all `2^n` subsets.
///
/// A subset is feasible when it violates no constraint and splits no
/// supergroup. Among feasible subsets of maximal aggregate the one whose
/// ascending id list is lexicographically smallest wins.
pub fn exhaustive_oracle(inst: &Instance) -> Result<Partition, PartitionError> {
    let n = inst.elements.len();
    if n > MAX_ORACLE_ELEMENTS {
        return Err(PartitionError::TooLarge {
            elements: n,
            limit: MAX_ORACLE_ELEMENTS,
        });
    }
    inst.ensure_valid()?;
    let graph = build_dependency_graph(&inst.elements, &inst.constraints)?;
    let bit = |id: &ElementId| 1u32 << graph.index_of(id).expect("valid instance");

    let values: Vec<i64> = graph
        .nodes()
        .iter()
        .map(|id| inst.element(id).expect("node is an element").value)
        .collect();
    let groups: Vec<u32> = tarjan_scc(&graph)
        .iter()
        .filter(|s| s.members.len() > 1)
        .map(|s| s.members.iter().fold(0, |m, id| m | bit(id)))
        .collect();
    let mut requires = Vec::new();
    let mut excludes = Vec::new();
    let mut capacities: Vec<(Vec<(u32, i128)>, i128)> = Vec::new();
    for c in &inst.constraints {
        match c {
            Constraint::Requires { a, b } => requires.push((bit(a), bit(b))),
            Constraint::Excludes { a, b } => excludes.push(bit(a) | bit(b)),
            Constraint::Capacity { usage, bound, .. } => capacities.push((
                usage.iter().map(|(id, &u)| (bit(id), i128::from(u))).collect(),
                i128::from(*bound),
            )),
        }
    }

    let feasible = |s: u32| {
        groups.iter().all(|&g| s & g == 0 || s & g == g)
            && requires.iter().all(|&(a, b)| s & a == 0 || s & b != 0)
            && excludes.iter().all(|&m| s & m != m)
            && capacities
                .iter()
                .all(|(usage, bound)| usage.iter().filter(|(b, _)| s & b != 0).map(|(_, u)| u).sum::<i128>() <= *bound)
    };

    let mut best: Option<(i128, u32)> = None;
    for s in 0..(1u32 << n) {
        if !feasible(s) {
            continue;
        }
        let total: i128 = (0..n)
            .filter(|i| s & (1 << i) != 0)
            .map(|i| i128::from(values[i]))
            .sum();
        let better = match best {
            None => true,
            Some((bt, bs)) => total > bt || (total == bt && lex_cmp(s, bs) == Ordering::Less),
        };
        if better {
            best = Some((total, s));
        }
    }

    // The empty set is always feasible in a valid instance (bounds are
    // non-negative), so a best subset exists.
    let (_, mask) = best.expect("empty subset is feasible");
    let accepted: BTreeSet<ElementId> = (0..n)
        .filter(|i| mask & (1 << i) != 0)
        .map(|i| graph.nodes()[i].clone())
        .collect();
    Partition::from_accepted(inst, accepted)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{el, single_queue};
    use super::super::RuleKind;
    use super::*;

    #[test]
    fn lexicographic_order_of_subsets() {
        // {0} < {0,1} < {1}
        assert_eq!(lex_cmp(0b01, 0b11), Ordering::Less);
        assert_eq!(lex_cmp(0b11, 0b10), Ordering::Less);
        assert_eq!(lex_cmp(0b10, 0b10), Ordering::Equal);
        assert_eq!(lex_cmp(0, 0b1), Ordering::Less);
    }

    #[test]
    fn empty_instance() {
        assert_eq!(exhaustive_oracle(&Instance::default()).unwrap().aggregate, 0);
    }

    #[test]
    fn single_element() {
        let inst = single_queue(vec![el("e", 5, "q", &[])], RuleKind::ValuePriority, vec![]);
        let p = exhaustive_oracle(&inst).unwrap();
        assert_eq!(p.aggregate, 5);
        assert!(p.accepted.contains(&ElementId::from("e")));
    }

    #[test]
    fn capacity_gap_optimum() {
        let els = vec![el("a", 4, "q", &[]), el("b", 3, "q", &[]), el("c", 2, "q", &[])];
        let cap = Constraint::Capacity {
            resource: "liquidity".into(),
            usage: els.iter().map(|e| (e.id.clone(), e.value)).collect(),
            bound: 5,
        };
        let p = exhaustive_oracle(&single_queue(els, RuleKind::ValuePriority, vec![cap])).unwrap();
        assert_eq!(p.aggregate, 5);
        let ids: Vec<&str> = p.accepted.iter().map(|e| e.0.as_str()).collect();
        assert_eq!(ids, ["b", "c"]);
    }

    #[test]
    fn ties_prefer_smallest_id_list() {
        let els = vec![el("a", 2, "q", &[]), el("b", 1, "q", &[]), el("c", 1, "q", &[])];
        let cap = Constraint::Capacity {
            resource: "r".into(),
            usage: els.iter().map(|e| (e.id.clone(), 1)).collect(),
            bound: 1,
        };
        let p = exhaustive_oracle(&single_queue(els, RuleKind::ValuePriority, vec![cap])).unwrap();
        assert_eq!(p.aggregate, 2);
        // {a} beats nothing else at value 2; with a removed, {b} beats {c}.
        let els = vec![el("b", 1, "q", &[]), el("c", 1, "q", &[])];
        let cap = Constraint::Capacity {
            resource: "r".into(),
            usage: els.iter().map(|e| (e.id.clone(), 1)).collect(),
            bound: 1,
        };
        let p = exhaustive_oracle(&single_queue(els, RuleKind::ValuePriority, vec![cap])).unwrap();
        assert_eq!(p.accepted.iter().next().unwrap().0, "b");
    }

    #[test]
    fn refuses_large_instances() {
        let els: Vec<_> = (0..21).map(|i| el(&format!("e{i:02}"), 1, "q", &[])).collect();
        assert!(matches!(
            exhaustive_oracle(&single_queue(els, RuleKind::ValuePriority, vec![])),
            Err(PartitionError::TooLarge {
                elements: 21,
                limit: 20
            })
        ));
    }
}
