use std::collections::BTreeSet;

use super::{Constraint, Element, ElementId, PartitionError};

/// Directed graph over element ids. Node `i` is the `i`-th smallest id.
/// An edge `a -> b` means `a` depends on `b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    nodes: Vec<ElementId>,
    succ: Vec<Vec<usize>>,
}

impl DependencyGraph {
    /// Graph over `nodes` (any order, no duplicates) with the given edges.
    pub fn from_edges(nodes: Vec<ElementId>, edges: &[(ElementId, ElementId)]) -> Result<Self, PartitionError> {
        let mut nodes = nodes;
        nodes.sort();
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes.len()];
        for (a, b) in edges {
            let ia = nodes.binary_search(a);
            let ib = nodes.binary_search(b);
            match (ia, ib) {
                (Ok(ia), Ok(ib)) => {
                    succ[ia].insert(ib);
                }
                _ => {
                    return Err(PartitionError::DanglingReference {
                        from: a.clone(),
                        to: b.clone(),
                    })
                }
            }
        }
        Ok(Self {
            nodes,
            succ: succ.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn nodes(&self) -> &[ElementId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &ElementId) -> Option<usize> {
        self.nodes.binary_search(id).ok()
    }

    /// Successors of node `i`, ascending.
    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
    }
}

/// Edges `a -> b` for every `b` in `refs(a)` and every `Requires(a, b)`,
/// deduplicated.
pub fn build_dependency_graph(
    elements: &[Element],
    constraints: &[Constraint],
) -> Result<DependencyGraph, PartitionError> {
    let mut edges = Vec::new();
    for e in elements {
        for r in &e.refs {
            edges.push((e.id.clone(), r.clone()));
        }
    }
    for c in constraints {
        if let Constraint::Requires { a, b } = c {
            edges.push((a.clone(), b.clone()));
        }
    }
    DependencyGraph::from_edges(elements.iter().map(|e| e.id.clone()).collect(), &edges)
}

/// A strongly connected component of the dependency graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperGroup {
    /// Emission index in [`tarjan_scc`].
    pub id: usize,
    /// Member ids, ascending.
    pub members: Vec<ElementId>,
}

const UNVISITED: usize = usize::MAX;

/// Iterative Tarjan over an adjacency list; components in emission order,
/// each listing node indices ascending.
pub(crate) fn tarjan_components(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next = 0usize;
    let mut comps = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));

        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            if let Some(&w) = succ[v].get(frame.1) {
                frame.1 += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }

            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("component root is on the stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// Strongly connected components in Tarjan's emission order: every edge
/// between two different supergroups runs from the later-emitted one to the
/// earlier-emitted one, so dependencies come first. Nodes are explored in
/// ascending id order, which makes the result deterministic.
pub fn tarjan_scc(g: &DependencyGraph) -> Vec<SuperGroup> {
    tarjan_components(&g.succ)
        .into_iter()
        .enumerate()
        .map(|(id, comp)| SuperGroup {
            id,
            members: comp.into_iter().map(|i| g.nodes[i].clone()).collect(),
        })
        .collect()
}

/// Graph of supergroups: `a -> b` when some element edge leads from a member
/// of `a` to a member of `b`, `a != b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CondensedDag {
    /// Supergroup of each graph node.
    pub component_of: Vec<usize>,
    /// Successors per supergroup, ascending and deduplicated.
    pub succ: Vec<Vec<usize>>,
}

impl CondensedDag {
    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn is_acyclic(&self) -> bool {
        let edges: Vec<(usize, usize)> = self
            .succ
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
            .collect();
        super::stable_topo_order(self.len(), &edges).is_some()
    }

    /// Longest path from each supergroup to a supergroup without successors.
    /// Requires successors to carry smaller ids, as Tarjan's order provides.
    pub fn ranks(&self) -> Vec<usize> {
        let mut rank = vec![0usize; self.len()];
        for g in 0..self.len() {
            rank[g] = self.succ[g]
                .iter()
                .map(|&h| {
                    debug_assert!(h < g, "successor emitted before its dependant");
                    rank[h] + 1
                })
                .max()
                .unwrap_or(0);
        }
        rank
    }
}

pub fn condense(g: &DependencyGraph, sccs: &[SuperGroup]) -> CondensedDag {
    let mut component_of = vec![usize::MAX; g.len()];
    for s in sccs {
        for m in &s.members {
            let i = g.index_of(m).expect("supergroup member is a graph node");
            component_of[i] = s.id;
        }
    }
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); sccs.len()];
    for (a, b) in g.edges() {
        let (ca, cb) = (component_of[a], component_of[b]);
        if ca != cb {
            succ[ca].insert(cb);
        }
    }
    CondensedDag {
        component_of,
        succ: succ.into_iter().map(|s| s.into_iter().collect()).collect(),
    }
}
