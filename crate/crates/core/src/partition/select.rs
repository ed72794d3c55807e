use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::graph::{build_dependency_graph, condense, tarjan_scc, SuperGroup};
use super::rules::{dispatch_rule, Candidate};
use super::{Constraint, Element, ElementId, Instance, Partition, PartitionError, QueueId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintViolation {
    Requires { a: ElementId, b: ElementId },
    Excludes { a: ElementId, b: ElementId },
    Capacity { resource: String, used: i128, bound: i64 },
}

/// Sum of the values of `accepted`.
pub fn aggregate(accepted: &BTreeSet<ElementId>, elements: &[Element]) -> Result<i64, PartitionError> {
    let values: BTreeMap<&ElementId, i64> = elements.iter().map(|e| (&e.id, e.value)).collect();
    accepted.iter().try_fold(0i64, |acc, id| {
        let v = values
            .get(id)
            .ok_or_else(|| PartitionError::UnknownElement(id.clone()))?;
        acc.checked_add(*v).ok_or(PartitionError::Overflow)
    })
}

/// Every violated constraint: `Requires` with `a` accepted and `b` not,
/// `Excludes` with both accepted, `Capacity` whose accepted usage exceeds
/// its bound.
pub fn check_constraints(p: &Partition, constraints: &[Constraint]) -> Vec<ConstraintViolation> {
    let acc = |id: &ElementId| p.accepted.contains(id);
    constraints
        .iter()
        .filter_map(|c| match c {
            Constraint::Requires { a, b } if acc(a) && !acc(b) => Some(ConstraintViolation::Requires {
                a: a.clone(),
                b: b.clone(),
            }),
            Constraint::Excludes { a, b } if acc(a) && acc(b) => Some(ConstraintViolation::Excludes {
                a: a.clone(),
                b: b.clone(),
            }),
            Constraint::Capacity { resource, usage, bound } => {
                let used: i128 = usage
                    .iter()
                    .filter(|(id, _)| acc(id))
                    .map(|(_, &u)| i128::from(u))
                    .sum();
                (used > i128::from(*bound)).then(|| ConstraintViolation::Capacity {
                    resource: resource.clone(),
                    used,
                    bound: *bound,
                })
            }
            _ => None,
        })
        .collect()
}

/// Ids of supergroups that are split between accepted and rejected.
pub fn check_atomicity(p: &Partition, supergroups: &[SuperGroup]) -> Vec<usize> {
    supergroups
        .iter()
        .filter(|s| {
            let n = s.members.iter().filter(|m| p.accepted.contains(*m)).count();
            n != 0 && n != s.members.len()
        })
        .map(|s| s.id)
        .collect()
}

/// Per-supergroup facts the greedy pass needs.
struct GroupFacts {
    members: Vec<usize>,
    total: i64,
    earliest: usize,
    owner: usize,
    touching: BTreeSet<usize>,
    requires: BTreeSet<usize>,
    usage: Vec<(usize, i128)>,
}

struct Selection {
    accepted: Vec<bool>,
    doomed: Vec<bool>,
    element_in: Vec<bool>,
    used: Vec<i128>,
    failed: Vec<bool>,
}

/// Greedy constraint-feasible partition.
///
/// Supergroups are visited dependencies-first (by rank in the condensation),
/// and within one rank by owning queue group, each group ordering its own
/// candidates with its rule. A supergroup is accepted whole when everything
/// it requires is already accepted, no exclusion pairs it with an accepted
/// element and every capacity still holds; otherwise it is rejected whole.
/// Rejecting any supergroup that touches an all-or-nothing queue group
/// rejects that entire group, retracting earlier acceptances together with
/// anything that required them. There is no other backtracking.
///
/// The result always satisfies every constraint.
pub fn select_partition(inst: &Instance) -> Result<Partition, PartitionError> {
    inst.ensure_valid()?;
    let graph = build_dependency_graph(&inst.elements, &inst.constraints)?;
    let sccs = tarjan_scc(&graph);
    let dag = condense(&graph, &sccs);
    let ranks = dag.ranks();
    let n = graph.len();

    let by_id: BTreeMap<&ElementId, &Element> = inst.elements.iter().map(|e| (&e.id, e)).collect();
    let element = |i: usize| by_id[&graph.nodes()[i]];

    let mut position = vec![0usize; n];
    for (pos, id) in inst.processing_order().iter().enumerate() {
        position[graph.index_of(id).expect("ordered element is a node")] = pos;
    }
    let queue_rank: BTreeMap<QueueId, usize> = inst
        .queue_order()
        .into_iter()
        .enumerate()
        .map(|(i, q)| (q, i))
        .collect();
    let mut group_of_queue: BTreeMap<&QueueId, usize> = BTreeMap::new();
    for (gi, g) in inst.groups.iter().enumerate() {
        for q in &g.queues {
            group_of_queue.insert(q, gi);
        }
    }
    let group_key: Vec<usize> = inst
        .groups
        .iter()
        .map(|g| g.queues.iter().map(|q| queue_rank[q]).min().unwrap_or(usize::MAX))
        .collect();
    let all_or_nothing: Vec<bool> = inst.groups.iter().map(|g| g.rule.is_all_or_nothing()).collect();

    let mut excludes: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut caps: Vec<i64> = Vec::new();
    let mut usage_of: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for c in &inst.constraints {
        match c {
            Constraint::Excludes { a, b } => {
                let (ia, ib) = (graph.index_of(a).expect("valid"), graph.index_of(b).expect("valid"));
                excludes[ia].push(ib);
                excludes[ib].push(ia);
            }
            Constraint::Capacity { usage, bound, .. } => {
                let k = caps.len();
                caps.push(*bound);
                for (id, &u) in usage {
                    if u != 0 {
                        usage_of[graph.index_of(id).expect("valid")].push((k, u));
                    }
                }
            }
            Constraint::Requires { .. } => {}
        }
    }

    let mut facts: Vec<GroupFacts> = sccs
        .iter()
        .map(|s| {
            let members: Vec<usize> = s
                .members
                .iter()
                .map(|m| graph.index_of(m).expect("member is a node"))
                .collect();
            let first = *members.iter().min_by_key(|&&i| position[i]).expect("non-empty");
            let mut usage: BTreeMap<usize, i128> = BTreeMap::new();
            for &i in &members {
                for &(k, u) in &usage_of[i] {
                    *usage.entry(k).or_default() += i128::from(u);
                }
            }
            GroupFacts {
                total: members.iter().map(|&i| element(i).value).sum(),
                earliest: position[first],
                owner: group_of_queue[&element(first).queue],
                touching: members.iter().map(|&i| group_of_queue[&element(i).queue]).collect(),
                requires: BTreeSet::new(),
                usage: usage.into_iter().collect(),
                members,
            }
        })
        .collect();
    for c in &inst.constraints {
        if let Constraint::Requires { a, b } = c {
            let ga = dag.component_of[graph.index_of(a).expect("valid")];
            let gb = dag.component_of[graph.index_of(b).expect("valid")];
            if ga != gb {
                facts[ga].requires.insert(gb);
            }
        }
    }
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); facts.len()];
    for (g, f) in facts.iter().enumerate() {
        for &h in &f.requires {
            dependents[h].push(g);
        }
    }
    let mut by_group: Vec<Vec<usize>> = vec![Vec::new(); inst.groups.len()];
    for (g, f) in facts.iter().enumerate() {
        for &qg in &f.touching {
            by_group[qg].push(g);
        }
    }

    let mut order: Vec<usize> = (0..facts.len()).collect();
    order.sort_by_key(|&g| (ranks[g], group_key[facts[g].owner], facts[g].owner, g));
    let mut visit = Vec::with_capacity(order.len());
    for chunk in order.chunk_by(|&x, &y| ranks[x] == ranks[y] && facts[x].owner == facts[y].owner) {
        let mut cands: Vec<Candidate> = chunk
            .iter()
            .map(|&g| Candidate {
                supergroup: g,
                total_value: facts[g].total,
                earliest_position: facts[g].earliest,
            })
            .collect();
        dispatch_rule(inst.groups[facts[chunk[0]].owner].rule)(&mut cands);
        visit.extend(cands.into_iter().map(|c| c.supergroup));
    }

    let mut sel = Selection {
        accepted: vec![false; facts.len()],
        doomed: vec![false; facts.len()],
        element_in: vec![false; n],
        used: vec![0; caps.len()],
        failed: vec![false; inst.groups.len()],
    };

    for g in visit {
        let f = &facts[g];
        let feasible = !sel.doomed[g]
            && f.requires.iter().all(|&h| sel.accepted[h])
            && f.members.iter().all(|&i| {
                excludes[i]
                    .iter()
                    .all(|&j| dag.component_of[j] != g && !sel.element_in[j])
            })
            && f.usage.iter().all(|&(k, u)| sel.used[k] + u <= i128::from(caps[k]));
        if feasible {
            sel.accepted[g] = true;
            for &i in &f.members {
                sel.element_in[i] = true;
            }
            for &(k, u) in &f.usage {
                sel.used[k] += u;
            }
        } else {
            sel.doomed[g] = true;
            let fail: Vec<usize> = f
                .touching
                .iter()
                .copied()
                .filter(|&qg| all_or_nothing[qg] && !sel.failed[qg])
                .collect();
            cascade(&mut sel, &facts, &dependents, &by_group, &all_or_nothing, fail);
        }
    }

    let accepted: BTreeSet<ElementId> = (0..n)
        .filter(|&i| sel.element_in[i])
        .map(|i| graph.nodes()[i].clone())
        .collect();
    let p = Partition::from_accepted(inst, accepted)?;
    debug_assert!(p.violations.is_empty(), "greedy produced {:?}", p.violations);
    Ok(p)
}

/// Fails the given all-or-nothing queue groups and retracts everything that
/// can no longer stand: accepted supergroups touching a failed group, and
/// accepted supergroups requiring a retracted one. A retracted supergroup
/// fails any further all-or-nothing group it touches.
fn cascade(
    sel: &mut Selection,
    facts: &[GroupFacts],
    dependents: &[Vec<usize>],
    by_group: &[Vec<usize>],
    all_or_nothing: &[bool],
    mut failing: Vec<usize>,
) {
    for &qg in &failing {
        sel.failed[qg] = true;
    }
    let mut retract: Vec<usize> = Vec::new();
    loop {
        if let Some(qg) = failing.pop() {
            for &g in &by_group[qg] {
                sel.doomed[g] = true;
                if sel.accepted[g] {
                    retract.push(g);
                }
            }
            continue;
        }
        let Some(g) = retract.pop() else { break };
        if !sel.accepted[g] {
            continue;
        }
        sel.accepted[g] = false;
        sel.doomed[g] = true;
        let f = &facts[g];
        for &i in &f.members {
            sel.element_in[i] = false;
        }
        for &(k, u) in &f.usage {
            sel.used[k] -= u;
        }
        for &qg in &f.touching {
            if all_or_nothing[qg] && !sel.failed[qg] {
                sel.failed[qg] = true;
                failing.push(qg);
            }
        }
        retract.extend(dependents[g].iter().copied().filter(|&d| sel.accepted[d]));
    }
}
