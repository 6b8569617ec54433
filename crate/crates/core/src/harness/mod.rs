//! End-to-end experiments: simulate, normalize, fit, evaluate, and write CSV tables.
//!
//! Each experiment first runs [`normalize`] on its graph and refuses to continue
//! unless the plan is the expected one, so the statistical pipeline is always
//! driven by the graph algorithm rather than by hard-coded feature lists alone.
//! Replicates run in parallel; replicate `i` draws everything from the seed
//! derived from `(master seed, "replicate/i")`, so outputs do not depend on
//! scheduling.

mod config;
mod cross_hospital;
mod linear_gaussian;
mod perturbation;
mod selection_bias;
mod table;

use std::path::PathBuf;

use rayon::prelude::*;

pub use config::{
    ExperimentConfig, ExperimentId, HospitalKnobs, Knobs, LinearGaussianKnobs, PerturbationKnobs, SelectionBiasKnobs,
};
pub use cross_hospital::{
    exp_cross_hospital, AurocRow, ComplexityRow, CrossHospitalResult, FeatureSet, HospitalModel, VarianceRow,
};
pub use linear_gaussian::{exp_linear_gaussian, LinearGaussianResult, LinearModelKind, MseRow};
pub use perturbation::{exp_perturbation, PerturbationResult, PerturbationRow, PerturbedModel};
pub use selection_bias::{exp_selection_bias, EvalSplit, SelectionBiasResult, SelectionModel, SelectionRow};
pub use table::Table;

use crate::error::{Error, Result};
use crate::graph::{parse_dag, CausalDag};
use crate::rng::derive_seed;
use crate::sem::{estimate_counterfactual, fit_additive_sem, parse_sem, Dataset, FittedSem, SemSpec, Template};
use crate::stability::{normalize, NormalizationPlan};

/// Graph and model files of the built-in scenarios.
pub mod scenarios {
    pub const SCREENING_DAG: &str = include_str!("../../data/screening.dag");
    pub const HOSPITAL_DAG: &str = include_str!("../../data/hospital.dag");
    pub const HOSPITAL_SOURCE_SEM: &str = include_str!("../../data/hospital_source.sem");
    pub const HOSPITAL_TARGET_SEM: &str = include_str!("../../data/hospital_target.sem");
    pub const SELECTION_DAG: &str = include_str!("../../data/selection.dag");
    pub const SELECTION_SEM: &str = include_str!("../../data/selection.sem");

    /// Linear-Gaussian model on [`SCREENING_DAG`] with edge weights `w1` (D→T),
    /// `w2` (D→C), `w3` (T→Y), `w4` (C→Y) and a common noise scale.
    pub fn screening_sem(w1: f64, w2: f64, w3: f64, w4: f64, noise_sd: f64) -> String {
        format!(
            "eq D = noise gaussian {noise_sd}\n\
             eq T = {w1}*D + noise gaussian {noise_sd}\n\
             eq C = {w2}*D + noise gaussian {noise_sd}\n\
             eq Y = {w3}*T + {w4}*C + noise gaussian {noise_sd}\n"
        )
    }
}

pub(crate) fn dag(text: &str) -> Result<CausalDag> {
    parse_dag(text)?.build()
}

pub(crate) fn sem(text: &str) -> Result<SemSpec<f64>> {
    parse_sem(text)
}

/// Normalizes `graph` and checks that the final conditioning set is `expected`.
pub fn gate_plan(graph: &CausalDag, expected: &[&str]) -> Result<NormalizationPlan> {
    let plan = normalize(graph)?;
    let found = plan.final_names();
    if found.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(Error::PlanMismatch {
            expected: format!("{{{}}}", expected.join(", ")),
            found: format!("{{{}}}", found.into_iter().collect::<Vec<_>>().join(", ")),
        });
    }
    Ok(plan)
}

/// Fits the structural equation behind the plan's single counterfactual with
/// `template`, whose parents must be exactly the recipe's fit parents.
pub(crate) fn fit_recipe(plan: &NormalizationPlan, data: &Dataset<f64>, template: &str) -> Result<FittedSem<f64>> {
    let [recipe] = plan.recipes.as_slice() else {
        return Err(Error::PlanMismatch {
            expected: "one counterfactual".into(),
            found: format!("{} counterfactuals", plan.recipes.len()),
        });
    };
    let template = Template::parse(template)?;
    if template.parents() != recipe.fit_parents {
        return Err(Error::PlanMismatch { expected: format!("{recipe}"), found: format!("template {template}") });
    }
    fit_additive_sem(data, &template, &recipe.counterfactual.base)
}

/// `data` with the estimated counterfactual of every recipe in `plan` appended,
/// using `fit` as the base variable's fitted equation.
pub(crate) fn with_counterfactual(
    data: &Dataset<f64>,
    plan: &NormalizationPlan,
    fit: &FittedSem<f64>,
) -> Result<Dataset<f64>> {
    let mut out = data.clone();
    for recipe in &plan.recipes {
        let cf = &recipe.counterfactual;
        out.insert(cf.name(), estimate_counterfactual(fit, data, &cf.intervened)?)?;
    }
    Ok(out)
}

pub(crate) fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Runs `f(replicate, seed)` for every replicate in parallel, in replicate order.
pub(crate) fn replicates<R, F>(config: &ExperimentConfig, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize, u64) -> Result<R> + Sync,
{
    (0..config.replicates).into_par_iter().map(|i| f(i, derive_seed(config.seed, &format!("replicate/{i}")))).collect()
}

pub(crate) fn mean_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Result of any experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    LinearGaussian(LinearGaussianResult),
    CrossHospital(CrossHospitalResult),
    Perturbation(PerturbationResult),
    SelectionBias(SelectionBiasResult),
}

impl ExperimentOutput {
    pub fn tables(&self) -> Vec<Table> {
        match self {
            ExperimentOutput::LinearGaussian(r) => r.tables(),
            ExperimentOutput::CrossHospital(r) => r.tables(),
            ExperimentOutput::Perturbation(r) => r.tables(),
            ExperimentOutput::SelectionBias(r) => r.tables(),
        }
    }

    /// A few lines of headline numbers.
    pub fn summary(&self) -> String {
        match self {
            ExperimentOutput::LinearGaussian(r) => r.summary(),
            ExperimentOutput::CrossHospital(r) => r.summary(),
            ExperimentOutput::Perturbation(r) => r.summary(),
            ExperimentOutput::SelectionBias(r) => r.summary(),
        }
    }
}

/// Validates `config` and runs its experiment without writing anything.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    Ok(match &config.knobs {
        Knobs::LinearGaussian(k) => ExperimentOutput::LinearGaussian(exp_linear_gaussian(config, k)?),
        Knobs::CrossHospital(k) => ExperimentOutput::CrossHospital(exp_cross_hospital(config, k)?),
        Knobs::Perturbation(k) => ExperimentOutput::Perturbation(exp_perturbation(config, k)?),
        Knobs::SelectionBias(k) => ExperimentOutput::SelectionBias(exp_selection_bias(config, k)?),
    })
}

/// Runs the experiment and writes its tables to `config.out_dir`.
pub fn run_and_write(config: &ExperimentConfig) -> Result<(ExperimentOutput, Vec<PathBuf>)> {
    let output = run(config)?;
    let paths = output.tables().iter().map(|t| t.write(&config.out_dir, config)).collect::<Result<Vec<_>>>()?;
    Ok((output, paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_files_parse_and_validate() {
        let g = dag(scenarios::HOSPITAL_DAG).unwrap();
        sem(scenarios::HOSPITAL_SOURCE_SEM).unwrap().validate(&g).unwrap();
        sem(scenarios::HOSPITAL_TARGET_SEM).unwrap().validate(&g).unwrap();
        let s = dag(scenarios::SELECTION_DAG).unwrap();
        sem(scenarios::SELECTION_SEM).unwrap().validate(&s).unwrap();
        let lg = dag(scenarios::SCREENING_DAG).unwrap();
        sem(&scenarios::screening_sem(0.3, 2.0, -1.0, 0.5, 0.1)).unwrap().validate(&lg).unwrap();
    }

    #[test]
    fn plans_of_the_built_in_graphs() {
        gate_plan(&dag(scenarios::SCREENING_DAG).unwrap(), &["Y(C=∅)"]).unwrap();
        gate_plan(&dag(scenarios::HOSPITAL_DAG).unwrap(), &["Y(A=∅,C=∅)"]).unwrap();
        gate_plan(&dag(scenarios::SELECTION_DAG).unwrap(), &["Y(C=∅)"]).unwrap();
        let err = gate_plan(&dag(scenarios::SCREENING_DAG).unwrap(), &["Y"]).unwrap_err();
        assert!(matches!(err, Error::PlanMismatch { .. }), "{err}");
    }
}
