//! Causal DAGs with typed nodes.
//!
//! A [`GraphBuilder`] accepts arbitrary node and edge declarations and reports every
//! violated invariant through [`GraphBuilder::validate`]. [`CausalDag`] is the
//! validated, immutable form that all algorithms operate on.

mod parse;
mod paths;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

pub use parse::parse_dag;
pub use paths::{all_paths_between, d_separated, enumerate_active_paths, Direction, PathWitness};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Target,
    Observed,
    Unobserved,
    Selection,
    /// Latent node inserted by node-splitting; conditionable, never unstable.
    Counterfactual,
}

impl NodeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            NodeKind::Target => "target",
            NodeKind::Observed => "observed",
            NodeKind::Unobserved => "unobserved",
            NodeKind::Selection => "selection",
            NodeKind::Counterfactual => "counterfactual",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "target" => NodeKind::Target,
            "observed" => NodeKind::Observed,
            "unobserved" => NodeKind::Unobserved,
            "selection" => NodeKind::Selection,
            "counterfactual" => NodeKind::Counterfactual,
            _ => return None,
        })
    }

    /// Nodes whose presence on a path makes it unstable.
    pub fn is_unstable(self) -> bool {
        matches!(self, NodeKind::Unobserved | NodeKind::Selection)
    }

    /// Nodes a discriminative model may condition on (the target excluded).
    pub fn is_conditionable(self) -> bool {
        matches!(self, NodeKind::Observed | NodeKind::Counterfactual)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateNode(String),
    SelfLoop(String),
    DuplicateEdge(String, String),
    UndeclaredEndpoint { parent: String, child: String, missing: String },
    Cycle(String),
    TargetCount(usize),
    UnobservedOutDegree { node: String, out_degree: usize },
    SelectionWithoutParents(String),
    SelectionWithChildren(String),
    MultipleSelection(Vec<String>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNode(n) => write!(f, "duplicate node: {n}"),
            Violation::SelfLoop(n) => write!(f, "self-loop: {n} -> {n}"),
            Violation::DuplicateEdge(p, c) => write!(f, "duplicate edge: {p} -> {c}"),
            Violation::UndeclaredEndpoint { parent, child, missing } => {
                write!(f, "undeclared endpoint `{missing}` in edge {parent} -> {child}")
            }
            Violation::Cycle(n) => write!(f, "directed cycle through {n}"),
            Violation::TargetCount(k) => write!(f, "expected exactly one target node, found {k}"),
            Violation::UnobservedOutDegree { node, out_degree } => {
                write!(f, "unobserved node {node} has {out_degree} children (needs at least 2)")
            }
            Violation::SelectionWithoutParents(n) => {
                write!(f, "selection node {n} has no parents")
            }
            Violation::SelectionWithChildren(n) => write!(f, "selection node {n} has children"),
            Violation::MultipleSelection(ns) => {
                write!(f, "more than one selection node: {}", ns.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Unvalidated node and edge declarations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphBuilder {
    pub nodes: Vec<(String, NodeKind)>,
    pub edges: Vec<(String, String)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(mut self, name: &str, kind: NodeKind) -> Self {
        self.nodes.push((name.to_string(), kind));
        self
    }

    pub fn edge(mut self, parent: &str, child: &str) -> Self {
        self.edges.push((parent.to_string(), child.to_string()));
        self
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut kinds: BTreeMap<&str, NodeKind> = BTreeMap::new();
        for (name, kind) in &self.nodes {
            if kinds.insert(name, *kind).is_some() {
                violations.push(Violation::DuplicateNode(name.clone()));
            }
        }

        let mut seen = BTreeSet::new();
        let mut adjacency: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut in_degree: BTreeMap<&str, usize> = BTreeMap::new();
        for (p, c) in &self.edges {
            if p == c {
                violations.push(Violation::SelfLoop(p.clone()));
                continue;
            }
            let mut ok = true;
            for end in [p, c] {
                if !kinds.contains_key(end.as_str()) {
                    violations.push(Violation::UndeclaredEndpoint {
                        parent: p.clone(),
                        child: c.clone(),
                        missing: end.clone(),
                    });
                    ok = false;
                }
            }
            if !seen.insert((p.as_str(), c.as_str())) {
                violations.push(Violation::DuplicateEdge(p.clone(), c.clone()));
                continue;
            }
            if ok {
                adjacency.entry(p).or_default().insert(c);
                *in_degree.entry(c).or_default() += 1;
            }
        }

        if let Err(node) = kahn(kinds.keys().copied(), &adjacency, &in_degree) {
            violations.push(Violation::Cycle(node.to_string()));
        }

        let targets = kinds.values().filter(|k| **k == NodeKind::Target).count();
        if targets != 1 {
            violations.push(Violation::TargetCount(targets));
        }
        let selections: Vec<String> =
            kinds.iter().filter(|(_, k)| **k == NodeKind::Selection).map(|(n, _)| n.to_string()).collect();
        if selections.len() > 1 {
            violations.push(Violation::MultipleSelection(selections.clone()));
        }
        for (name, kind) in &kinds {
            let out_degree = adjacency.get(name).map_or(0, |s| s.len());
            match kind {
                NodeKind::Unobserved if out_degree < 2 => {
                    violations.push(Violation::UnobservedOutDegree { node: name.to_string(), out_degree })
                }
                NodeKind::Selection => {
                    if in_degree.get(name).copied().unwrap_or(0) == 0 {
                        violations.push(Violation::SelectionWithoutParents(name.to_string()));
                    }
                    if out_degree > 0 {
                        violations.push(Violation::SelectionWithChildren(name.to_string()));
                    }
                }
                _ => {}
            }
        }
        ValidationReport { violations }
    }

    pub fn build(&self) -> Result<CausalDag> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(Error::InvalidGraph(report));
        }
        Ok(CausalDag::from_parts(&self.nodes, &self.edges))
    }

    /// Renders the declarations in the line-oriented DAG file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, k) in &self.nodes {
            out.push_str(&format!("node {n} {k}\n"));
        }
        for (p, c) in &self.edges {
            out.push_str(&format!("edge {p} {c}\n"));
        }
        out
    }
}

/// Kahn's algorithm with lexicographic tie-break. `Err` names a node left on a cycle.
fn kahn<'a>(
    nodes: impl Iterator<Item = &'a str>,
    adjacency: &BTreeMap<&'a str, BTreeSet<&'a str>>,
    in_degree: &BTreeMap<&'a str, usize>,
) -> std::result::Result<Vec<&'a str>, &'a str> {
    let mut remaining: BTreeMap<&str, usize> = BTreeMap::new();
    for n in nodes {
        remaining.insert(n, in_degree.get(n).copied().unwrap_or(0));
    }
    let mut ready: BTreeSet<&str> = remaining.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut order = Vec::with_capacity(remaining.len());
    while let Some(n) = ready.pop_first() {
        order.push(n);
        if let Some(children) = adjacency.get(n) {
            for c in children {
                let d = remaining.get_mut(c).expect("declared child");
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
    }
    if order.len() < remaining.len() {
        let placed: BTreeSet<&str> = order.iter().copied().collect();
        let stuck = remaining.keys().find(|n| !placed.contains(*n)).expect("unplaced node");
        return Err(stuck);
    }
    Ok(order)
}

/// A validated causal DAG. Immutable; rewrites return new values.
#[derive(Debug, Clone)]
pub struct CausalDag {
    names: Vec<String>,
    kinds: Vec<NodeKind>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    target: usize,
}

impl PartialEq for CausalDag {
    fn eq(&self, other: &Self) -> bool {
        self.node_set() == other.node_set() && self.edge_set() == other.edge_set()
    }
}

impl CausalDag {
    fn from_parts(nodes: &[(String, NodeKind)], edges: &[(String, String)]) -> Self {
        let names: Vec<String> = nodes.iter().map(|(n, _)| n.clone()).collect();
        let kinds: Vec<NodeKind> = nodes.iter().map(|(_, k)| *k).collect();
        let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut parents = vec![Vec::new(); names.len()];
        let mut children = vec![Vec::new(); names.len()];
        for (p, c) in edges {
            let (pi, ci) = (index[p], index[c]);
            parents[ci].push(pi);
            children[pi].push(ci);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_by(|a, b| names[*a].cmp(&names[*b]));
        }
        let target = kinds.iter().position(|k| *k == NodeKind::Target).expect("validated");
        CausalDag { names, kinds, index, parents, children, target }
    }

    /// Re-checks every invariant; always valid for graphs built through this crate.
    pub fn validate(&self) -> ValidationReport {
        self.to_builder().validate()
    }

    pub fn to_builder(&self) -> GraphBuilder {
        let nodes = self.names.iter().cloned().zip(self.kinds.iter().copied()).collect();
        let mut edges = Vec::new();
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                edges.push((self.names[p].clone(), self.names[c].clone()));
            }
        }
        edges.sort_by(|a, b| self.index[&a.0].cmp(&self.index[&b.0]).then(a.1.cmp(&b.1)));
        GraphBuilder { nodes, edges }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn target(&self) -> &str {
        &self.names[self.target]
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn node_names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&str, NodeKind)> {
        self.names.iter().map(String::as_str).zip(self.kinds.iter().copied())
    }

    pub fn node_set(&self) -> BTreeMap<String, NodeKind> {
        self.nodes().map(|(n, k)| (n.to_string(), k)).collect()
    }

    pub fn edge_set(&self) -> BTreeSet<(String, String)> {
        self.to_builder().edges.into_iter().collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn kind(&self, name: &str) -> Result<NodeKind> {
        Ok(self.kinds[self.idx(name)?])
    }

    /// Observed nodes other than the target.
    pub fn observed_features(&self) -> BTreeSet<String> {
        self.nodes().filter(|(_, k)| *k == NodeKind::Observed).map(|(n, _)| n.to_string()).collect()
    }

    pub fn selection(&self) -> Option<&str> {
        self.nodes().find(|(_, k)| *k == NodeKind::Selection).map(|(n, _)| n)
    }

    pub fn parents(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.idx(name)?;
        Ok(self.parents[i].iter().map(|&p| self.names[p].as_str()).collect())
    }

    pub fn children(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.idx(name)?;
        Ok(self.children[i].iter().map(|&c| self.names[c].as_str()).collect())
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        match (self.index.get(parent), self.index.get(child)) {
            (Some(&p), Some(&c)) => self.parents[c].contains(&p),
            _ => false,
        }
    }

    /// Every node reachable along directed edges, excluding `name` itself.
    pub fn descendants(&self, name: &str) -> Result<BTreeSet<String>> {
        let start = self.idx(name)?;
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &c in &self.children[u] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        Ok((0..self.len()).filter(|&i| seen[i]).map(|i| self.names[i].clone()).collect())
    }

    /// Topological order, ties broken lexicographically by node name.
    pub fn topological_order(&self) -> Result<Vec<String>> {
        let mut adjacency: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut in_degree: BTreeMap<&str, usize> = BTreeMap::new();
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                adjacency.entry(&self.names[p]).or_default().insert(&self.names[c]);
                *in_degree.entry(&self.names[c]).or_default() += 1;
            }
        }
        kahn(self.node_names(), &adjacency, &in_degree)
            .map(|o| o.into_iter().map(str::to_string).collect())
            .map_err(|n| Error::Cycle { node: n.to_string() })
    }

    pub(crate) fn idx(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub(crate) fn name_of(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub(crate) fn kind_of(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }

    pub(crate) fn parents_of(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn children_of(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub(crate) fn target_index(&self) -> usize {
        self.target
    }
}

impl fmt::Display for CausalDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_builder().to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use NodeKind::*;

    fn screening_graph() -> GraphBuilder {
        GraphBuilder::new()
            .node("D", Unobserved)
            .node("T", Target)
            .node("C", Observed)
            .node("Y", Observed)
            .edge("D", "T")
            .edge("D", "C")
            .edge("T", "Y")
            .edge("C", "Y")
    }

    #[test]
    fn confounded_screening_graph_is_valid() {
        assert!(screening_graph().validate().is_valid());
    }

    #[test]
    fn lone_target_is_valid() {
        assert!(GraphBuilder::new().node("T", Target).validate().is_valid());
    }

    #[test]
    fn self_loop_is_reported() {
        let r = GraphBuilder::new().node("T", Target).node("A", Observed).edge("A", "A").validate();
        assert_eq!(r.violations, vec![Violation::SelfLoop("A".into())]);
        assert!(r.to_string().contains("self-loop"));
    }

    #[test]
    fn every_violation_is_listed() {
        let r = GraphBuilder::new()
            .node("T", Target)
            .node("T", Observed)
            .node("U", Unobserved)
            .node("S", Selection)
            .node("S2", Selection)
            .node("A", Observed)
            .edge("U", "A")
            .edge("A", "B")
            .edge("U", "A")
            .edge("S", "A")
            .validate();
        let v = &r.violations;
        assert!(v.contains(&Violation::DuplicateNode("T".into())));
        assert!(v.contains(&Violation::DuplicateEdge("U".into(), "A".into())));
        assert!(v.iter().any(|x| matches!(x, Violation::UndeclaredEndpoint { missing, .. } if missing == "B")));
        assert!(v.contains(&Violation::UnobservedOutDegree { node: "U".into(), out_degree: 1 }));
        assert!(v.contains(&Violation::SelectionWithChildren("S".into())));
        assert!(v.contains(&Violation::SelectionWithoutParents("S2".into())));
        assert!(v.iter().any(|x| matches!(x, Violation::MultipleSelection(_))));
    }

    #[test]
    fn cycle_and_target_count_are_reported() {
        let r = GraphBuilder::new().node("A", Observed).node("B", Observed).edge("A", "B").edge("B", "A").validate();
        assert!(r.violations.contains(&Violation::Cycle("A".into())));
        assert!(r.violations.contains(&Violation::TargetCount(0)));
    }

    #[test]
    fn topological_order_breaks_ties_by_name() {
        let g = GraphBuilder::new().node("T", Target).node("B", Observed).node("A", Observed).build().unwrap();
        assert_eq!(g.topological_order().unwrap(), ["A", "B", "T"]);
        let chain = GraphBuilder::new()
            .node("T", Target)
            .node("C", Observed)
            .node("B", Observed)
            .node("A", Observed)
            .edge("A", "B")
            .edge("B", "C")
            .build()
            .unwrap();
        let order = chain.topological_order().unwrap();
        let pos = |n: &str| order.iter().position(|x| x == n).unwrap();
        assert!(pos("A") < pos("B") && pos("B") < pos("C"));
    }

    #[test]
    fn descendants_are_transitive() {
        let g = screening_graph().build().unwrap();
        assert_eq!(g.descendants("D").unwrap(), ["C", "T", "Y"].map(String::from).into());
        assert!(g.descendants("Y").unwrap().is_empty());
        assert!(matches!(g.descendants("Q"), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn builder_round_trips_through_text() {
        let g = screening_graph().build().unwrap();
        let back = parse_dag(&g.to_string()).unwrap().build().unwrap();
        assert_eq!(g, back);
    }
}
