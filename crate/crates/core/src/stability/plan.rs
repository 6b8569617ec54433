use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::split::{node_split, CounterfactualNode};
use super::{stable_conditioning_set, Removal, StabilityReport};
use crate::error::{Error, Result};
use crate::graph::{all_paths_between, parse_dag, CausalDag, GraphBuilder, NodeKind, PathWitness};

/// A member of the final conditioning set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditioningMember {
    Observed(String),
    Counterfactual(CounterfactualNode),
}

impl ConditioningMember {
    pub fn name(&self) -> String {
        match self {
            ConditioningMember::Observed(n) => n.clone(),
            ConditioningMember::Counterfactual(cf) => cf.name(),
        }
    }
}

impl fmt::Display for ConditioningMember {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// How to estimate one counterfactual column: fit the structural equation of
/// `counterfactual.base` on `fit_parents`, then subtract the fitted contributions
/// of `counterfactual.intervened`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimationRecipe {
    pub counterfactual: CounterfactualNode,
    pub fit_parents: BTreeSet<String>,
}

impl fmt::Display for EstimationRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fit: Vec<&str> = self.fit_parents.iter().map(String::as_str).collect();
        let sub: Vec<&str> = self.counterfactual.intervened.iter().map(String::as_str).collect();
        write!(
            f,
            "{}: fit {} on {{{}}}; subtract fitted {} contributions",
            self.counterfactual,
            self.counterfactual.base,
            fit.join(", "),
            sub.join(" and ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Removed(Removal),
    SkippedNoStablePath {
        node: String,
    },
    Added {
        node: String,
    },
    Split {
        node: String,
        counterfactual: CounterfactualNode,
        unstable: Vec<PathWitness>,
    },
    SkippedUnsplittable {
        node: String,
        witness: PathWitness,
    },
    /// Adding the node would open an unstable path to some member of the set.
    SkippedActivates {
        node: String,
        witness: PathWitness,
    },
    Pruned {
        node: String,
    },
    PrunedUnstable {
        node: String,
        witness: PathWitness,
    },
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Removed(r) => {
                write!(f, "remove {} (length-{} unstable path {})", r.node, r.path_length, r.witness)
            }
            TraceEvent::SkippedNoStablePath { node } => {
                write!(f, "skip {node}: no active stable path")
            }
            TraceEvent::Added { node } => write!(f, "add {node}: no active unstable path"),
            TraceEvent::Split { node, counterfactual, unstable } => {
                write!(f, "split {node} -> add {counterfactual}; severs")?;
                for (i, w) in unstable.iter().enumerate() {
                    let sep = if i == 0 { " " } else { "; " };
                    write!(f, "{sep}{w}")?;
                }
                Ok(())
            }
            TraceEvent::SkippedUnsplittable { node, witness } => {
                write!(f, "skip {node}: unstable path not through an observed parent: {witness}")
            }
            TraceEvent::SkippedActivates { node, witness } => {
                write!(f, "skip {node}: would activate unstable path {witness}")
            }
            TraceEvent::Pruned { node } => write!(f, "prune {node}: no active stable path"),
            TraceEvent::PrunedUnstable { node, witness } => {
                write!(f, "prune {node}: unstable path reopened {witness}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RetainOptions {
    /// Also intervene on every other observed, non-target parent of a split node.
    pub widen_parents: bool,
}

#[derive(Debug, Clone)]
pub struct NormalizationPlan {
    pub original: CausalDag,
    pub stability: StabilityReport,
    pub final_set: BTreeSet<ConditioningMember>,
    pub modified_graph: CausalDag,
    /// Every split applied to build `modified_graph`, in order.
    pub splits: Vec<CounterfactualNode>,
    /// One per counterfactual member of `final_set`.
    pub recipes: Vec<EstimationRecipe>,
    pub trace: Vec<TraceEvent>,
}

impl NormalizationPlan {
    pub fn final_names(&self) -> BTreeSet<String> {
        self.final_set.iter().map(ConditioningMember::name).collect()
    }

    /// Human-readable report: stable set, vulnerable set, trace, final set, recipes.
    pub fn report(&self) -> String {
        self.render(true)
    }

    /// [`report`](Self::report) without the step-by-step trace.
    pub fn summary(&self) -> String {
        self.render(false)
    }

    fn render(&self, with_trace: bool) -> String {
        let join = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        out.push_str(&format!("target: {}\n", self.original.target()));
        out.push_str(&format!("stable set Z: {{{}}}\n", join(&mut self.stability.stable_set.iter().cloned())));
        out.push_str(&format!("vulnerable set V: [{}]\n", join(&mut self.stability.vulnerable.iter().cloned())));
        if with_trace {
            out.push_str("trace:\n");
            for e in &self.trace {
                out.push_str(&format!("  {e}\n"));
            }
        }
        out.push_str(&format!(
            "final conditioning set Z': {{{}}}\n",
            join(&mut self.final_set.iter().map(ConditioningMember::name))
        ));
        for r in &self.recipes {
            out.push_str(&format!("recipe {r}\n"));
        }
        out
    }

    /// Machine-readable plan: the original DAG lines, one `cf <base> <p1,p2,...>`
    /// line per split and one `condition <name>` line per final-set member.
    pub fn to_plan_file(&self) -> String {
        let mut out = String::from("# normalization plan\n");
        out.push_str(&self.original.to_builder().to_text());
        for cf in &self.splits {
            let ps: Vec<&str> = cf.intervened.iter().map(String::as_str).collect();
            out.push_str(&format!("cf {} {}\n", cf.base, ps.join(",")));
        }
        for m in &self.final_set {
            out.push_str(&format!("condition {}\n", m.name()));
        }
        out
    }
}

/// Parsed plan file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanFile {
    pub graph: GraphBuilder,
    pub splits: Vec<CounterfactualNode>,
    pub conditioning: BTreeSet<String>,
}

impl PlanFile {
    /// Re-applies the recorded splits to the original graph.
    pub fn modified_graph(&self) -> Result<CausalDag> {
        let mut g = self.graph.build()?;
        for cf in &self.splits {
            g = node_split(&g, &cf.base, &cf.intervened)?;
        }
        Ok(g)
    }
}

pub fn parse_plan(text: &str) -> Result<PlanFile> {
    let mut dag_lines = String::new();
    let mut splits = Vec::new();
    let mut conditioning = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["cf", base, parents] => {
                splits.push(CounterfactualNode::new(base, parents.split(',')));
                dag_lines.push('\n');
            }
            ["condition", name] => {
                conditioning.insert(name.to_string());
                dag_lines.push('\n');
            }
            ["cf" | "condition", ..] => {
                return Err(Error::Parse { line: i + 1, message: format!("malformed `{}` line", fields[0]) })
            }
            _ => {
                dag_lines.push_str(line);
                dag_lines.push('\n');
            }
        }
    }
    let graph = parse_dag(&dag_lines)?;
    Ok(PlanFile { graph, splits, conditioning })
}

/// First active unstable path from the target to any member of `members`, given `members`.
fn first_unstable(graph: &CausalDag, members: &BTreeSet<String>) -> Result<Option<PathWitness>> {
    for m in members {
        if let Some(p) = active_paths(graph, m, members)?.into_iter().find(|p| p.unstable) {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

fn active_paths(graph: &CausalDag, to: &str, cond: &BTreeSet<String>) -> Result<Vec<PathWitness>> {
    all_paths_between(graph, graph.target(), to, cond, true)
}

/// Processes the vulnerable set in reverse topological order of the original graph.
///
/// For each `v`, with conditioning set `Z' ∪ {v}`:
/// no active stable path → skip; no active unstable path → add `v`;
/// every active unstable path enters `v` from an observed parent → split `v` on
/// those parents and add the counterfactual; otherwise skip. An addition is also
/// skipped when it would open an unstable path to any other member (a conditioned
/// collider, or a collider whose descendant is the selection node). Members of
/// `Z'` without an active stable path are then pruned until none remain.
pub fn retain_vulnerable(
    graph: &CausalDag,
    report: &StabilityReport,
    options: RetainOptions,
) -> Result<NormalizationPlan> {
    let order = graph.topological_order()?;
    let rank: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut pending: Vec<&String> = report.vulnerable.iter().collect();
    pending.sort_by_key(|v| std::cmp::Reverse(rank[v.as_str()]));

    let mut modified = graph.clone();
    let mut members: BTreeMap<String, ConditioningMember> =
        report.stable_set.iter().map(|n| (n.clone(), ConditioningMember::Observed(n.clone()))).collect();
    let mut recipes = Vec::new();
    let mut splits = Vec::new();
    let mut trace: Vec<TraceEvent> = report.audit.iter().cloned().map(TraceEvent::Removed).collect();

    for v in pending {
        let mut cond: BTreeSet<String> = members.keys().cloned().collect();
        cond.insert(v.clone());
        let paths = active_paths(&modified, v, &cond)?;
        let (unstable, stable): (Vec<_>, Vec<_>) = paths.into_iter().partition(|p| p.unstable);
        if stable.is_empty() {
            trace.push(TraceEvent::SkippedNoStablePath { node: v.clone() });
            continue;
        }
        if unstable.is_empty() {
            if let Some(witness) = first_unstable(&modified, &cond)? {
                trace.push(TraceEvent::SkippedActivates { node: v.clone(), witness });
                continue;
            }
            members.insert(v.clone(), ConditioningMember::Observed(v.clone()));
            trace.push(TraceEvent::Added { node: v.clone() });
            continue;
        }
        let mut intervened = BTreeSet::new();
        let mut blocker = None;
        for p in &unstable {
            let (neighbour, into_v) = p.last_hop();
            if into_v && modified.kind(neighbour)? == NodeKind::Observed {
                intervened.insert(neighbour.to_string());
            } else {
                blocker = Some(p.clone());
                break;
            }
        }
        if let Some(witness) = blocker {
            trace.push(TraceEvent::SkippedUnsplittable { node: v.clone(), witness });
            continue;
        }
        if options.widen_parents {
            for p in modified.parents(v)? {
                if modified.kind(p)? == NodeKind::Observed {
                    intervened.insert(p.to_string());
                }
            }
        }
        let split = node_split(&modified, v, &intervened)?;
        let cf = CounterfactualNode::new(v, intervened);
        let mut cond: BTreeSet<String> = members.keys().cloned().collect();
        cond.insert(cf.name());
        if let Some(witness) = first_unstable(&split, &cond)? {
            trace.push(TraceEvent::SkippedActivates { node: cf.name(), witness });
            continue;
        }
        modified = split;
        let fit_parents = graph
            .parents(v)?
            .into_iter()
            .filter(|p| matches!(graph.kind(p), Ok(NodeKind::Observed | NodeKind::Target)))
            .map(str::to_string)
            .collect();
        splits.push(cf.clone());
        recipes.push(EstimationRecipe { counterfactual: cf.clone(), fit_parents });
        members.insert(cf.name(), ConditioningMember::Counterfactual(cf.clone()));
        trace.push(TraceEvent::Split { node: v.clone(), counterfactual: cf, unstable });
    }

    // Pruning can unblock paths through removed non-colliders, so instability is
    // re-checked alongside the stable-path requirement until nothing changes.
    loop {
        let cond: BTreeSet<String> = members.keys().cloned().collect();
        let mut dead = Vec::new();
        for name in members.keys() {
            if !active_paths(&modified, name, &cond)?.iter().any(|p| !p.unstable) {
                dead.push(TraceEvent::Pruned { node: name.clone() });
            }
        }
        if dead.is_empty() {
            if let Some(witness) = first_unstable(&modified, &cond)? {
                dead.push(TraceEvent::PrunedUnstable { node: witness.end().to_string(), witness });
            }
        }
        if dead.is_empty() {
            break;
        }
        for event in dead {
            if let TraceEvent::Pruned { node } | TraceEvent::PrunedUnstable { node, .. } = &event {
                members.remove(node);
            }
            trace.push(event);
        }
    }

    let final_set: BTreeSet<ConditioningMember> = members.into_values().collect();
    recipes.retain(|r| final_set.contains(&ConditioningMember::Counterfactual(r.counterfactual.clone())));
    Ok(NormalizationPlan {
        original: graph.clone(),
        stability: report.clone(),
        final_set,
        modified_graph: modified,
        splits,
        recipes,
        trace,
    })
}

pub fn normalize(graph: &CausalDag) -> Result<NormalizationPlan> {
    normalize_with(graph, RetainOptions::default())
}

pub fn normalize_with(graph: &CausalDag, options: RetainOptions) -> Result<NormalizationPlan> {
    let report = stable_conditioning_set(graph)?;
    retain_vulnerable(graph, &report, options)
}
