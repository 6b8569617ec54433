//! Stable conditioning sets, node-splitting and counterfactual retention.
//!
//! [`stable_conditioning_set`] removes every observed feature reachable from the
//! target by an active unstable path. [`retain_vulnerable`] then adds back removed
//! variables, or counterfactual versions of them produced by [`node_split`], when
//! doing so activates no unstable path. [`normalize`] chains the two.

mod plan;
mod split;

use std::collections::BTreeSet;

pub use plan::{
    normalize, normalize_with, parse_plan, retain_vulnerable, ConditioningMember, EstimationRecipe, NormalizationPlan,
    PlanFile, RetainOptions, TraceEvent,
};
pub use split::{node_split, CounterfactualNode};

use crate::error::Result;
use crate::graph::{enumerate_active_paths, CausalDag, PathWitness};

/// A node moved from the stable set to the vulnerable set, with the path that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Removal {
    pub node: String,
    pub path_length: usize,
    pub witness: PathWitness,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityReport {
    pub stable_set: BTreeSet<String>,
    /// Vulnerable nodes in removal order.
    pub vulnerable: Vec<String>,
    pub audit: Vec<Removal>,
}

/// Starts from every observed feature and, for path lengths `k = 1..N-1`, removes
/// the end node of each active unstable path of length `k` from the target.
///
/// The paths for one length are collected before any removal at that length.
/// Sweeps repeat until one removes nothing, so the first sweep is the whole
/// algorithm whenever it already leaves no active unstable path.
pub fn stable_conditioning_set(graph: &CausalDag) -> Result<StabilityReport> {
    let mut stable = graph.observed_features();
    let mut vulnerable = Vec::new();
    let mut audit = Vec::new();
    let horizon = graph.len().saturating_sub(1);
    loop {
        let mut removed_any = false;
        for k in 1..=horizon {
            let paths = enumerate_active_paths(graph, &stable, k)?;
            let hits: Vec<PathWitness> =
                paths.into_iter().filter(|p| p.len() == k && p.unstable && stable.contains(p.end())).collect();
            for witness in hits {
                let node = witness.end().to_string();
                if stable.remove(&node) {
                    vulnerable.push(node.clone());
                    audit.push(Removal { node, path_length: k, witness });
                    removed_any = true;
                }
            }
        }
        if !removed_any {
            break;
        }
    }
    Ok(StabilityReport { stable_set: stable, vulnerable, audit })
}
