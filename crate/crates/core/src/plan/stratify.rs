//! Relation dependency graph and its Tarjan condensation.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::flatten::{CoreBody, CoreProgram};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("negation inside a recursive cycle: {}", .cycle.join(" -> "))]
pub struct UnstratifiableNegation {
    /// Relations along the cycle, starting and ending at the negating head.
    pub cycle: Vec<String>,
}

/// Directed graph over relation indices (positions in the program's relation
/// list). An edge `body -> head` exists for every rule; `negated` marks
/// edges contributed by a negated clause.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DepGraph {
    pub names: Vec<String>,
    pub edges: BTreeSet<(usize, usize, bool)>,
}

impl DepGraph {
    pub fn successors(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((n, 0, false)..=(n, usize::MAX, true))
            .map(|&(_, h, _)| h)
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.node(from), self.node(to)) {
            (Some(f), Some(t)) => self.edges.contains(&(f, t, false)) || self.edges.contains(&(f, t, true)),
            _ => false,
        }
    }
}

pub fn dependency_graph(program: &CoreProgram) -> DepGraph {
    let names: Vec<String> = program.relations.iter().map(|(n, _)| n.clone()).collect();
    let idx = |n: &str| names.iter().position(|m| m == n).expect("relation declared");
    let mut edges = BTreeSet::new();
    for r in &program.rules {
        let h = idx(&r.head.rel);
        for b in &r.body {
            match b {
                CoreBody::Pos { atom, .. } => {
                    edges.insert((idx(&atom.rel), h, false));
                }
                CoreBody::Neg(atom) => {
                    edges.insert((idx(&atom.rel), h, true));
                }
                CoreBody::Cmp { .. } => {}
            }
        }
    }
    DepGraph { names, edges }
}

/// Strongly connected components, each listing its nodes in discovery
/// order. Components come out with successors first.
pub fn tarjan(n: usize, succ: impl Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();
    // Explicit call stack: (node, successor list, position in it).
    let mut calls: Vec<(usize, Vec<usize>, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        calls.push((root, succ(root), 0));

        while let Some((v, succs, pos)) = calls.last_mut() {
            let v = *v;
            if *pos < succs.len() {
                let w = succs[*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let ws = succ(w);
                    calls.push((w, ws, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            calls.pop();
            if let Some((parent, _, _)) = calls.last() {
                low[*parent] = low[*parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_by_key(|&w| index[w]);
                out.push(comp);
            }
        }
    }
    out
}

/// One component of the condensation, in evaluation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub nodes: Vec<usize>,
    pub recursive: bool,
}

/// Condensation in dependency order (bodies before heads). Fails when a
/// negated edge lies inside a component.
pub fn stratify(graph: &DepGraph) -> Result<Vec<Component>, UnstratifiableNegation> {
    let n = graph.names.len();
    let mut comps = tarjan(n, |v| graph.successors(v).collect());
    comps.reverse();
    let mut comp_of = vec![0; n];
    for (i, c) in comps.iter().enumerate() {
        for &v in c {
            comp_of[v] = i;
        }
    }
    for &(from, to, negated) in &graph.edges {
        if negated && comp_of[from] == comp_of[to] {
            let path = path_within(graph, &comp_of, to, from);
            let mut cycle: Vec<String> = path.iter().map(|&v| graph.names[v].clone()).collect();
            cycle.push(graph.names[to].clone());
            return Err(UnstratifiableNegation { cycle });
        }
    }
    Ok(comps
        .into_iter()
        .map(|nodes| {
            let recursive = nodes.len() > 1 || graph.successors(nodes[0]).any(|s| s == nodes[0]);
            Component { nodes, recursive }
        })
        .collect())
}

fn path_within(graph: &DepGraph, comp_of: &[usize], from: usize, to: usize) -> Vec<usize> {
    let mut prev = vec![usize::MAX; graph.names.len()];
    let mut queue = VecDeque::from([from]);
    prev[from] = from;
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for w in graph.successors(v) {
            if comp_of[w] == comp_of[from] && prev[w] == usize::MAX {
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatten::flatten_program;
    use crate::syntax::{desugar, parse_program, validate};

    fn graph(src: &str) -> DepGraph {
        dependency_graph(&flatten_program(&desugar(validate(parse_program(src).unwrap()).unwrap())))
    }

    fn names(g: &DepGraph, comps: &[Component]) -> Vec<Vec<String>> {
        comps
            .iter()
            .map(|c| c.nodes.iter().map(|&v| g.names[v].clone()).collect())
            .collect()
    }

    #[test]
    fn tc_graph_and_strata() {
        let g = graph("tc(a,b) :- edge(a,b). tc(a,c) :- tc(a,b), edge(b,c).");
        assert!(g.has_edge("edge", "tc"));
        assert!(g.has_edge("tc", "tc"));
        assert_eq!(g.edges.len(), 2);
        let s = stratify(&g).unwrap();
        assert_eq!(names(&g, &s), vec![vec!["edge"], vec!["tc"]]);
        assert!(!s[0].recursive);
        assert!(s[1].recursive);
    }

    #[test]
    fn empty_program() {
        let g = graph("");
        assert!(g.edges.is_empty());
        assert!(stratify(&g).unwrap().is_empty());
    }

    #[test]
    fn negation_cycle_rejected() {
        let g = graph("p() :- !q(), r(). q() :- p().");
        let err = stratify(&g).unwrap_err();
        assert_eq!(err.cycle.first(), err.cycle.last());
        assert!(err.cycle.contains(&"p".to_string()));
        assert!(err.cycle.contains(&"q".to_string()));
    }

    #[test]
    fn stratified_negation_accepted() {
        let g = graph("r(x) :- e(x). p(x) :- e(x), !r(x).");
        let s = stratify(&g).unwrap();
        let order = names(&g, &s);
        let pos = |n: &str| order.iter().position(|c| c.iter().any(|m| m == n)).unwrap();
        assert!(pos("r") < pos("p"));
    }

    #[test]
    fn tarjan_matches_reachability() {
        // 0 -> 1 -> 2 -> 0, 2 -> 3, 3 -> 4 -> 3, 5 alone
        let adj = [vec![1], vec![2], vec![0, 3], vec![4], vec![3], vec![]];
        let comps = tarjan(6, |v| adj[v].clone());
        let mut sets: Vec<Vec<usize>> = comps
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort();
                c
            })
            .collect();
        sets.sort();
        assert_eq!(sets, vec![vec![0, 1, 2], vec![3, 4], vec![5]]);
        let pos = |v: usize| comps.iter().position(|c| c.contains(&v)).unwrap();
        assert!(pos(3) < pos(0), "successors are emitted first");
    }
}
