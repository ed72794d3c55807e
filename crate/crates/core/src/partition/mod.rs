//! Batch mode: split a population of settlement elements into an accepted
//! and a rejected set, maximising the total value of the accepted set while
//! honouring business constraints.
//!
//! Elements live in queues; queues carry an internal precedence order and are
//! themselves partially ordered. Cross-references and `Requires` constraints
//! link elements into a dependency graph whose strongly connected components
//! ("supergroups") must be accepted or rejected as a unit.

mod graph;
mod oracle;
mod rules;
mod select;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{build_dependency_graph, condense, tarjan_scc, CondensedDag, DependencyGraph, SuperGroup};
pub use oracle::{exhaustive_oracle, MAX_ORACLE_ELEMENTS};
pub use rules::{dispatch_rule, Candidate, CandidateOrdering};
pub use select::{aggregate, check_atomicity, check_constraints, select_partition, ConstraintViolation};

macro_rules! string_id {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

string_id!(ElementId);
string_id!(QueueId);
string_id!(GroupId);

/// A settlement item. `value` is in minor currency units.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Element {
    pub id: ElementId,
    pub value: i64,
    pub queue: QueueId,
    #[serde(default)]
    pub refs: Vec<ElementId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Queue {
    pub id: QueueId,
    /// Members in insertion order.
    #[serde(default)]
    pub members: Vec<ElementId>,
    /// `(earlier, later)` pairs; must be acyclic.
    #[serde(default)]
    pub precedence: Vec<(ElementId, ElementId)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSystem {
    #[serde(default)]
    pub queues: Vec<Queue>,
    /// `(earlier, later)` pairs over queue ids; must be acyclic.
    #[serde(default)]
    pub queue_precedence: Vec<(QueueId, QueueId)>,
}

/// Processing rule of a queue group. Closed: a new rule is a new variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    ValuePriority,
    FifoStrict,
    AllOrNothingGroup,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueGroup {
    pub id: GroupId,
    pub queues: Vec<QueueId>,
    pub rule: RuleKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Constraint {
    /// `a` may only be accepted together with `b`.
    Requires { a: ElementId, b: ElementId },
    /// `a` and `b` may not both be accepted.
    Excludes { a: ElementId, b: ElementId },
    /// Summed usage over accepted elements may not exceed `bound`.
    Capacity {
        resource: String,
        usage: BTreeMap<ElementId, i64>,
        bound: i64,
    },
}

/// A complete batch problem.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    #[serde(default)]
    pub elements: Vec<Element>,
    #[serde(default)]
    pub system: QueueSystem,
    #[serde(default)]
    pub groups: Vec<QueueGroup>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

/// Accepted/rejected split of every element of an instance.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub accepted: BTreeSet<ElementId>,
    pub rejected: BTreeSet<ElementId>,
    pub aggregate: i64,
    pub violations: Vec<ConstraintViolation>,
}

impl Partition {
    /// Builds the partition accepting exactly `accepted`, with the aggregate
    /// and constraint report filled in.
    pub fn from_accepted(inst: &Instance, accepted: BTreeSet<ElementId>) -> Result<Self, PartitionError> {
        let agg = aggregate(&accepted, &inst.elements)?;
        let rejected = inst
            .elements
            .iter()
            .map(|e| e.id.clone())
            .filter(|id| !accepted.contains(id))
            .collect();
        let mut p = Partition {
            accepted,
            rejected,
            aggregate: agg,
            violations: Vec::new(),
        };
        p.violations = check_constraints(&p, &inst.constraints);
        Ok(p)
    }
}

/// A broken instance invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SystemViolation {
    DuplicateElement(ElementId),
    NegativeValue(ElementId),
    SelfReference(ElementId),
    DanglingReference { from: ElementId, to: ElementId },
    UnknownQueue { element: ElementId, queue: QueueId },
    DuplicateQueue(QueueId),
    UnknownMember { queue: QueueId, element: ElementId },
    MisplacedMember { queue: QueueId, element: ElementId },
    RepeatedMember(ElementId),
    MissingMember { queue: QueueId, element: ElementId },
    PrecedenceOutsideQueue { queue: QueueId, element: ElementId },
    QueuePrecedenceCycle(QueueId),
    UnknownQueueInPrecedence(QueueId),
    QueueOrderCycle,
    DuplicateGroup(GroupId),
    UnknownQueueInGroup { group: GroupId, queue: QueueId },
    QueueInSeveralGroups(QueueId),
    UngroupedQueue(QueueId),
    UnknownElementInConstraint { constraint: usize, element: ElementId },
    NegativeUsage { constraint: usize, element: ElementId },
    NegativeBound { constraint: usize },
    ValueOverflow,
}

impl fmt::Display for SystemViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SystemViolation::*;
        match self {
            DuplicateElement(e) => write!(f, "duplicate element id `{e}`"),
            NegativeValue(e) => write!(f, "element `{e}` has a negative value"),
            SelfReference(e) => write!(f, "element `{e}` references itself"),
            DanglingReference { from, to } => write!(f, "element `{from}` references unknown element `{to}`"),
            UnknownQueue { element, queue } => write!(f, "element `{element}` names unknown queue `{queue}`"),
            DuplicateQueue(q) => write!(f, "duplicate queue id `{q}`"),
            UnknownMember { queue, element } => write!(f, "queue `{queue}` lists unknown element `{element}`"),
            MisplacedMember { queue, element } => {
                write!(f, "queue `{queue}` lists `{element}`, which belongs to another queue")
            }
            RepeatedMember(e) => write!(f, "element `{e}` is listed more than once"),
            MissingMember { queue, element } => {
                write!(f, "element `{element}` is missing from the members of queue `{queue}`")
            }
            PrecedenceOutsideQueue { queue, element } => {
                write!(f, "precedence of queue `{queue}` mentions non-member `{element}`")
            }
            QueuePrecedenceCycle(q) => write!(f, "precedence within queue `{q}` is cyclic"),
            UnknownQueueInPrecedence(q) => write!(f, "queue precedence mentions unknown queue `{q}`"),
            QueueOrderCycle => write!(f, "queue precedence is cyclic"),
            DuplicateGroup(g) => write!(f, "duplicate group id `{g}`"),
            UnknownQueueInGroup { group, queue } => write!(f, "group `{group}` lists unknown queue `{queue}`"),
            QueueInSeveralGroups(q) => write!(f, "queue `{q}` belongs to more than one group"),
            UngroupedQueue(q) => write!(f, "queue `{q}` belongs to no group"),
            UnknownElementInConstraint { constraint, element } => {
                write!(f, "constraint #{constraint} mentions unknown element `{element}`")
            }
            NegativeUsage { constraint, element } => {
                write!(f, "constraint #{constraint} gives `{element}` a negative usage")
            }
            NegativeBound { constraint } => write!(f, "constraint #{constraint} has a negative bound"),
            ValueOverflow => write!(f, "element values sum beyond the 64-bit range"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("invalid instance: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<SystemViolation>),
    #[error("dangling reference from `{from}` to `{to}`")]
    DanglingReference { from: ElementId, to: ElementId },
    #[error("unknown element `{0}`")]
    UnknownElement(ElementId),
    #[error("aggregate overflows 64 bits")]
    Overflow,
    #[error("instance has {elements} elements; exhaustive search is limited to {limit}")]
    TooLarge { elements: usize, limit: usize },
}

/// Kahn's algorithm over nodes `0..n`, always releasing the smallest ready
/// index first. `None` if the edges contain a cycle.
pub(crate) fn stable_topo_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in edges {
        succ[a].push(b);
        indegree[b] += 1;
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| indegree[v] == 0).map(Reverse).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        out.push(v);
        for &w in &succ[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(Reverse(w));
            }
        }
    }
    (out.len() == n).then_some(out)
}

pub fn validate_system(inst: &Instance) -> Vec<SystemViolation> {
    use SystemViolation::*;
    let mut out = Vec::new();

    let mut elements: BTreeMap<&ElementId, &Element> = BTreeMap::new();
    for e in &inst.elements {
        if elements.insert(&e.id, e).is_some() {
            out.push(DuplicateElement(e.id.clone()));
        }
    }
    let queue_ids: BTreeSet<&QueueId> = inst.system.queues.iter().map(|q| &q.id).collect();

    let mut total: i64 = 0;
    let mut overflow = false;
    for e in &inst.elements {
        if e.value < 0 {
            out.push(NegativeValue(e.id.clone()));
        }
        match total.checked_add(e.value.max(0)) {
            Some(t) => total = t,
            None => overflow = true,
        }
        for r in &e.refs {
            if r == &e.id {
                out.push(SelfReference(e.id.clone()));
            } else if !elements.contains_key(r) {
                out.push(DanglingReference {
                    from: e.id.clone(),
                    to: r.clone(),
                });
            }
        }
        if !queue_ids.contains(&e.queue) {
            out.push(UnknownQueue {
                element: e.id.clone(),
                queue: e.queue.clone(),
            });
        }
    }

    let mut seen_queues = BTreeSet::new();
    let mut listed: BTreeSet<&ElementId> = BTreeSet::new();
    for q in &inst.system.queues {
        if !seen_queues.insert(&q.id) {
            out.push(DuplicateQueue(q.id.clone()));
            continue;
        }
        let mut position: BTreeMap<&ElementId, usize> = BTreeMap::new();
        for m in &q.members {
            match elements.get(m) {
                None => out.push(UnknownMember {
                    queue: q.id.clone(),
                    element: m.clone(),
                }),
                Some(e) if e.queue != q.id => out.push(MisplacedMember {
                    queue: q.id.clone(),
                    element: m.clone(),
                }),
                Some(_) => {}
            }
            if !listed.insert(m) {
                out.push(RepeatedMember(m.clone()));
            }
            let next = position.len();
            position.entry(m).or_insert(next);
        }
        let mut edges = Vec::new();
        let mut ok = true;
        for (a, b) in &q.precedence {
            for x in [a, b] {
                if !position.contains_key(x) {
                    out.push(PrecedenceOutsideQueue {
                        queue: q.id.clone(),
                        element: x.clone(),
                    });
                    ok = false;
                }
            }
            if ok {
                edges.push((position[a], position[b]));
            }
        }
        if ok && stable_topo_order(position.len(), &edges).is_none() {
            out.push(QueuePrecedenceCycle(q.id.clone()));
        }
    }
    for e in &inst.elements {
        if queue_ids.contains(&e.queue) && !listed.contains(&e.id) {
            out.push(MissingMember {
                queue: e.queue.clone(),
                element: e.id.clone(),
            });
        }
    }

    let queue_index: BTreeMap<&QueueId, usize> = queue_ids.iter().enumerate().map(|(i, q)| (*q, i)).collect();
    let mut edges = Vec::new();
    let mut ok = true;
    for (a, b) in &inst.system.queue_precedence {
        for x in [a, b] {
            if !queue_index.contains_key(x) {
                out.push(UnknownQueueInPrecedence(x.clone()));
                ok = false;
            }
        }
        if ok {
            edges.push((queue_index[a], queue_index[b]));
        }
    }
    if ok && stable_topo_order(queue_index.len(), &edges).is_none() {
        out.push(QueueOrderCycle);
    }

    let mut group_ids = BTreeSet::new();
    let mut grouped: BTreeSet<&QueueId> = BTreeSet::new();
    for g in &inst.groups {
        if !group_ids.insert(&g.id) {
            out.push(DuplicateGroup(g.id.clone()));
        }
        for q in &g.queues {
            if !queue_ids.contains(q) {
                out.push(UnknownQueueInGroup {
                    group: g.id.clone(),
                    queue: q.clone(),
                });
            } else if !grouped.insert(q) {
                out.push(QueueInSeveralGroups(q.clone()));
            }
        }
    }
    for q in &queue_ids {
        if !grouped.contains(q) {
            out.push(UngroupedQueue((*q).clone()));
        }
    }

    for (i, c) in inst.constraints.iter().enumerate() {
        let check = |id: &ElementId, out: &mut Vec<SystemViolation>| {
            if !elements.contains_key(id) {
                out.push(UnknownElementInConstraint {
                    constraint: i,
                    element: id.clone(),
                });
            }
        };
        match c {
            Constraint::Requires { a, b } | Constraint::Excludes { a, b } => {
                check(a, &mut out);
                check(b, &mut out);
            }
            Constraint::Capacity { usage, bound, .. } => {
                for (id, &u) in usage {
                    check(id, &mut out);
                    if u < 0 {
                        out.push(NegativeUsage {
                            constraint: i,
                            element: id.clone(),
                        });
                    }
                }
                if *bound < 0 {
                    out.push(NegativeBound { constraint: i });
                }
            }
        }
    }

    if overflow {
        out.push(ValueOverflow);
    }
    out
}

impl Instance {
    pub fn validate(&self) -> Vec<SystemViolation> {
        validate_system(self)
    }

    pub fn ensure_valid(&self) -> Result<(), PartitionError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(PartitionError::Invalid(v))
        }
    }

    pub fn element(&self, id: &ElementId) -> Option<&Element> {
        self.elements.iter().find(|e| &e.id == id)
    }

    /// Queue ids in processing order: a stable topological order of the
    /// queue precedence, ties going to the smaller id. Assumes a valid system.
    pub fn queue_order(&self) -> Vec<QueueId> {
        let ids: Vec<&QueueId> = self
            .system
            .queues
            .iter()
            .map(|q| &q.id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&QueueId, usize> = ids.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let edges: Vec<(usize, usize)> = self
            .system
            .queue_precedence
            .iter()
            .map(|(a, b)| (index[a], index[b]))
            .collect();
        stable_topo_order(ids.len(), &edges)
            .expect("queue precedence is acyclic")
            .into_iter()
            .map(|i| ids[i].clone())
            .collect()
    }

    /// Every element in global processing order: queues in
    /// [`Instance::queue_order`], members of a queue by their precedence with
    /// ties broken by insertion position. Assumes a valid system.
    pub fn processing_order(&self) -> Vec<ElementId> {
        let by_id: BTreeMap<&QueueId, &Queue> = self.system.queues.iter().map(|q| (&q.id, q)).collect();
        let mut out = Vec::with_capacity(self.elements.len());
        for qid in self.queue_order() {
            let q = by_id[&qid];
            let pos: BTreeMap<&ElementId, usize> = q.members.iter().enumerate().map(|(i, m)| (m, i)).collect();
            let edges: Vec<(usize, usize)> = q.precedence.iter().map(|(a, b)| (pos[a], pos[b])).collect();
            let order = stable_topo_order(q.members.len(), &edges).expect("queue precedence is acyclic");
            out.extend(order.into_iter().map(|i| q.members[i].clone()));
        }
        out
    }

    /// The sub-instance over the elements in `keep`, for a batch over the
    /// elements that actually arrived during a real-time run.
    ///
    /// References and precedence pairs to dropped elements disappear, as do
    /// `Excludes` constraints touching them. An element that `Requires` a
    /// dropped element cannot be satisfied; it is pinned out through a
    /// zero-bound capacity named `awaiting-arrival`.
    pub fn restrict_to(&self, keep: &BTreeSet<ElementId>) -> Instance {
        let kept = |id: &ElementId| keep.contains(id);
        let elements = self
            .elements
            .iter()
            .filter(|e| kept(&e.id))
            .map(|e| Element {
                refs: e.refs.iter().filter(|r| kept(r)).cloned().collect(),
                ..e.clone()
            })
            .collect();
        let queues = self
            .system
            .queues
            .iter()
            .map(|q| Queue {
                id: q.id.clone(),
                members: q.members.iter().filter(|m| kept(m)).cloned().collect(),
                precedence: q
                    .precedence
                    .iter()
                    .filter(|(a, b)| kept(a) && kept(b))
                    .cloned()
                    .collect(),
            })
            .collect();
        let mut blocked = BTreeMap::new();
        let mut constraints = Vec::new();
        for c in &self.constraints {
            match c {
                Constraint::Requires { a, b } if kept(a) && !kept(b) => {
                    blocked.insert(a.clone(), 1);
                }
                Constraint::Requires { a, b } | Constraint::Excludes { a, b } => {
                    if kept(a) && kept(b) {
                        constraints.push(c.clone());
                    }
                }
                Constraint::Capacity { resource, usage, bound } => constraints.push(Constraint::Capacity {
                    resource: resource.clone(),
                    usage: usage
                        .iter()
                        .filter(|(id, _)| kept(id))
                        .map(|(id, u)| (id.clone(), *u))
                        .collect(),
                    bound: *bound,
                }),
            }
        }
        if !blocked.is_empty() {
            constraints.push(Constraint::Capacity {
                resource: "awaiting-arrival".into(),
                usage: blocked,
                bound: 0,
            });
        }
        Instance {
            elements,
            system: QueueSystem {
                queues,
                queue_precedence: self.system.queue_precedence.clone(),
            },
            groups: self.groups.clone(),
            constraints,
        }
    }
}
