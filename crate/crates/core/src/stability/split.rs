use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{CausalDag, NodeKind};

/// `base(P=∅)`: the base variable with the additive contributions of `intervened` removed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CounterfactualNode {
    pub base: String,
    pub intervened: BTreeSet<String>,
}

impl CounterfactualNode {
    pub fn new<I, S>(base: &str, intervened: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CounterfactualNode { base: base.to_string(), intervened: intervened.into_iter().map(Into::into).collect() }
    }

    /// Canonical node name, parents sorted: `Y(A=∅,C=∅)`.
    pub fn name(&self) -> String {
        let parts: Vec<String> = self.intervened.iter().map(|p| format!("{p}=∅")).collect();
        format!("{}({})", self.base, parts.join(","))
    }
}

impl fmt::Display for CounterfactualNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Inserts `node(P=∅)` as a parent of `node`. The counterfactual takes over every
/// parent of `node` outside `intervened`; `node` keeps exactly `intervened` plus
/// the counterfactual as parents.
pub fn node_split(graph: &CausalDag, node: &str, intervened: &BTreeSet<String>) -> Result<CausalDag> {
    let kind = graph.kind(node)?;
    if kind != NodeKind::Observed {
        return Err(Error::InvalidSplit(format!("cannot split {kind} node `{node}`")));
    }
    if intervened.is_empty() {
        return Err(Error::InvalidSplit(format!("no parents to intervene on for `{node}`")));
    }
    let parents: BTreeSet<&str> = graph.parents(node)?.into_iter().collect();
    for p in intervened {
        if !parents.contains(p.as_str()) {
            return Err(Error::InvalidSplit(format!("`{p}` is not a parent of `{node}`")));
        }
        match graph.kind(p)? {
            NodeKind::Observed | NodeKind::Target => {}
            other => return Err(Error::InvalidSplit(format!("cannot intervene on {other} parent `{p}` of `{node}`"))),
        }
    }
    let cf = CounterfactualNode::new(node, intervened.iter().cloned()).name();
    if graph.contains(&cf) {
        return Err(Error::InvalidSplit(format!("`{cf}` already exists")));
    }

    let mut b = graph.to_builder();
    b.nodes.push((cf.clone(), NodeKind::Counterfactual));
    for (p, c) in b.edges.iter_mut() {
        if c == node && !intervened.contains(p.as_str()) {
            *c = cf.clone();
        }
    }
    b.edges.push((cf, node.to_string()));
    b.build()
}
