//! Simple-path enumeration and d-connection.

use std::collections::BTreeSet;
use std::fmt;

use super::{CausalDag, NodeKind};
use crate::error::{Error, Result};

/// Orientation of one path step relative to the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// `a -> b`
    Forward,
    /// `a <- b`
    Backward,
}

/// A simple path with its activity and stability classification.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathWitness {
    pub nodes: Vec<String>,
    pub directions: Vec<Direction>,
    pub active: bool,
    pub unstable: bool,
}

impl PathWitness {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn start(&self) -> &str {
        &self.nodes[0]
    }

    pub fn end(&self) -> &str {
        self.nodes.last().expect("paths are nonempty")
    }

    /// The neighbour of the end node on this path, and whether it points into the end.
    pub fn last_hop(&self) -> (&str, bool) {
        let n = self.nodes.len();
        (&self.nodes[n - 2], self.directions[n - 2] == Direction::Forward)
    }
}

impl fmt::Display for PathWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.nodes[0])?;
        for (node, dir) in self.nodes[1..].iter().zip(&self.directions) {
            let arrow = match dir {
                Direction::Forward => "->",
                Direction::Backward => "<-",
            };
            write!(f, " {arrow} {node}")?;
        }
        let stability = if self.unstable { "unstable" } else { "stable" };
        let activity = if self.active { "active" } else { "blocked" };
        write!(f, " [{activity}, {stability}]")
    }
}

/// Conditioned flags plus, per node, whether it opens a collider
/// (it or one of its descendants is conditioned).
pub(crate) struct Conditioning {
    conditioned: Vec<bool>,
    opens: Vec<bool>,
}

impl Conditioning {
    pub(crate) fn new(graph: &CausalDag, names: &BTreeSet<String>) -> Result<Self> {
        let n = graph.len();
        let mut conditioned = vec![false; n];
        for name in names {
            conditioned[graph.idx(name)?] = true;
        }
        for (i, c) in conditioned.iter_mut().enumerate() {
            if graph.kind_of(i) == NodeKind::Selection {
                *c = true;
            }
        }
        let mut opens = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&i| conditioned[i]).collect();
        while let Some(u) = stack.pop() {
            if opens[u] {
                continue;
            }
            opens[u] = true;
            stack.extend(graph.parents_of(u).iter().copied().filter(|&p| !opens[p]));
        }
        Ok(Conditioning { conditioned, opens })
    }

    /// Whether the middle node of a step pair blocks the path.
    fn blocks(&self, node: usize, into: Direction, out: Direction) -> bool {
        let collider = into == Direction::Forward && out == Direction::Backward;
        if collider {
            !self.opens[node]
        } else {
            self.conditioned[node]
        }
    }
}

struct Walk<'a, F> {
    graph: &'a CausalDag,
    cond: &'a Conditioning,
    max_len: usize,
    active_only: bool,
    path: Vec<usize>,
    dirs: Vec<Direction>,
    on_path: Vec<bool>,
    visit: F,
}

impl<F: FnMut(&[usize], &[Direction], bool)> Walk<'_, F> {
    fn run(&mut self, start: usize) {
        self.path.push(start);
        self.on_path[start] = true;
        self.extend(false);
    }

    fn extend(&mut self, blocked: bool) {
        if self.dirs.len() >= self.max_len {
            return;
        }
        let u = *self.path.last().expect("nonempty");
        let steps: Vec<(usize, Direction)> = self
            .graph
            .parents_of(u)
            .iter()
            .map(|&p| (p, Direction::Backward))
            .chain(self.graph.children_of(u).iter().map(|&c| (c, Direction::Forward)))
            .collect();
        for (w, dir) in steps {
            if self.on_path[w] {
                continue;
            }
            let now_blocked = blocked || self.dirs.last().is_some_and(|&into| self.cond.blocks(u, into, dir));
            if now_blocked && self.active_only {
                continue;
            }
            self.path.push(w);
            self.dirs.push(dir);
            self.on_path[w] = true;
            (self.visit)(&self.path, &self.dirs, !now_blocked);
            self.extend(now_blocked);
            self.on_path[w] = false;
            self.dirs.pop();
            self.path.pop();
        }
    }
}

fn walk(
    graph: &CausalDag,
    start: usize,
    cond: &Conditioning,
    max_len: usize,
    active_only: bool,
    visit: impl FnMut(&[usize], &[Direction], bool),
) {
    let mut w = Walk {
        graph,
        cond,
        max_len,
        active_only,
        path: Vec::new(),
        dirs: Vec::new(),
        on_path: vec![false; graph.len()],
        visit,
    };
    w.run(start);
}

fn witness(graph: &CausalDag, path: &[usize], dirs: &[Direction], active: bool) -> PathWitness {
    PathWitness {
        nodes: path.iter().map(|&i| graph.name_of(i).to_string()).collect(),
        directions: dirs.to_vec(),
        active,
        unstable: path.iter().any(|&i| graph.kind_of(i).is_unstable()),
    }
}

fn sort_witnesses(ws: &mut [PathWitness]) {
    ws.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.nodes.cmp(&b.nodes)));
}

/// All simple paths from the target of length `<= max_length` that end at a
/// conditionable node and are active given `conditioning` (selection nodes are
/// always conditioned). Sorted by length, then node sequence.
pub fn enumerate_active_paths(
    graph: &CausalDag,
    conditioning: &BTreeSet<String>,
    max_length: usize,
) -> Result<Vec<PathWitness>> {
    for name in conditioning {
        let kind = graph.kind(name)?;
        if !(kind.is_conditionable() || kind == NodeKind::Selection) {
            return Err(Error::InvalidConditioning(format!("cannot condition on {kind} node `{name}`")));
        }
    }
    let cond = Conditioning::new(graph, conditioning)?;
    let mut out = Vec::new();
    walk(graph, graph.target_index(), &cond, max_length, true, |path, dirs, active| {
        let end = *path.last().expect("nonempty");
        if graph.kind_of(end).is_conditionable() {
            out.push(witness(graph, path, dirs, active));
        }
    });
    sort_witnesses(&mut out);
    Ok(out)
}

/// Simple paths between two nodes. With `active_only` false, blocked paths are
/// included and flagged.
pub fn all_paths_between(
    graph: &CausalDag,
    from: &str,
    to: &str,
    conditioning: &BTreeSet<String>,
    active_only: bool,
) -> Result<Vec<PathWitness>> {
    let (a, b) = (graph.idx(from)?, graph.idx(to)?);
    let cond = Conditioning::new(graph, conditioning)?;
    let mut out = Vec::new();
    walk(graph, a, &cond, graph.len(), active_only, |path, dirs, active| {
        if *path.last().expect("nonempty") == b {
            out.push(witness(graph, path, dirs, active));
        }
    });
    sort_witnesses(&mut out);
    Ok(out)
}

/// True iff no active simple path joins `a` and `b` given `conditioning`.
pub fn d_separated(graph: &CausalDag, a: &str, b: &str, conditioning: &BTreeSet<String>) -> Result<bool> {
    let (ia, ib) = (graph.idx(a)?, graph.idx(b)?);
    if ia == ib {
        return Err(Error::InvalidConditioning(format!("`{a}` queried against itself")));
    }
    if conditioning.contains(a) || conditioning.contains(b) {
        return Err(Error::InvalidConditioning("query endpoints must not be conditioned".into()));
    }
    let cond = Conditioning::new(graph, conditioning)?;
    let mut connected = false;
    walk(graph, ia, &cond, graph.len(), true, |path, _, _| {
        connected |= *path.last().expect("nonempty") == ib;
    });
    Ok(!connected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphBuilder, NodeKind::*};

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn screening_graph() -> CausalDag {
        GraphBuilder::new()
            .node("D", Unobserved)
            .node("T", Target)
            .node("C", Observed)
            .node("Y", Observed)
            .edge("D", "T")
            .edge("D", "C")
            .edge("T", "Y")
            .edge("C", "Y")
            .build()
            .unwrap()
    }

    fn render(ws: &[PathWitness]) -> Vec<String> {
        ws.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn conditioning_on_collider_opens_stable_path() {
        let ws = enumerate_active_paths(&screening_graph(), &set(&["C", "Y"]), 3).unwrap();
        assert_eq!(
            render(&ws),
            ["T -> Y [active, stable]", "T <- D -> C [active, unstable]", "T -> Y <- C [active, stable]",]
        );
    }

    #[test]
    fn empty_conditioning_reaches_through_confounder() {
        let ws = enumerate_active_paths(&screening_graph(), &BTreeSet::new(), 3).unwrap();
        assert_eq!(
            render(&ws),
            ["T -> Y [active, stable]", "T <- D -> C [active, unstable]", "T <- D -> C -> Y [active, unstable]",]
        );
    }

    #[test]
    fn single_edge_graph() {
        let g = GraphBuilder::new().node("T", Target).node("Y", Observed).edge("T", "Y").build().unwrap();
        let ws = enumerate_active_paths(&g, &set(&["Y"]), 5).unwrap();
        assert_eq!(render(&ws), ["T -> Y [active, stable]"]);
    }

    #[test]
    fn conditioning_rejects_unknown_and_latent_nodes() {
        let g = screening_graph();
        assert!(matches!(enumerate_active_paths(&g, &set(&["Q"]), 3), Err(Error::UnknownNode(_))));
        assert!(matches!(enumerate_active_paths(&g, &set(&["D"]), 3), Err(Error::InvalidConditioning(_))));
    }

    #[test]
    fn d_separation_follows_blocking_rules() {
        let g = screening_graph();
        assert!(d_separated(&g, "T", "C", &set(&["D"])).unwrap());
        assert!(!d_separated(&g, "T", "C", &set(&["D", "Y"])).unwrap());
        let h = GraphBuilder::new().node("T", Target).node("A", Observed).node("B", Observed);
        let h = h.build().unwrap();
        assert!(d_separated(&h, "A", "B", &BTreeSet::new()).unwrap());
        assert!(d_separated(&h, "A", "B", &set(&["T"])).unwrap());
        assert!(d_separated(&g, "T", "Q", &BTreeSet::new()).is_err());
    }

    #[test]
    fn selection_is_implicitly_conditioned() {
        let g = GraphBuilder::new()
            .node("T", Target)
            .node("C", Observed)
            .node("S", Selection)
            .edge("T", "S")
            .edge("C", "S")
            .build()
            .unwrap();
        assert!(!d_separated(&g, "T", "C", &BTreeSet::new()).unwrap());
        let ws = enumerate_active_paths(&g, &BTreeSet::new(), 4).unwrap();
        assert_eq!(render(&ws), ["T -> S <- C [active, unstable]"]);
    }

    #[test]
    fn collider_opened_by_conditioned_descendant() {
        let g = GraphBuilder::new()
            .node("T", Target)
            .node("A", Observed)
            .node("M", Observed)
            .node("W", Observed)
            .edge("T", "M")
            .edge("A", "M")
            .edge("M", "W")
            .build()
            .unwrap();
        assert!(d_separated(&g, "T", "A", &BTreeSet::new()).unwrap());
        assert!(!d_separated(&g, "T", "A", &set(&["W"])).unwrap());
    }

    #[test]
    fn all_paths_flags_blocked_paths() {
        let g = screening_graph();
        let ws = all_paths_between(&g, "T", "C", &set(&["D"]), false).unwrap();
        assert_eq!(ws.len(), 2);
        assert!(ws.iter().all(|w| !w.active));
    }
}
