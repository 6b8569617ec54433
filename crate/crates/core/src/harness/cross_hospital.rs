use std::fmt;

use super::config::{ExperimentConfig, HospitalKnobs};
use super::table::{num, Table};
use super::{dag, fit_recipe, gate_plan, mean_of, names, replicates, scenarios, sem, with_counterfactual};
use crate::complexity::{ComplexityReport, LabeledPointSet};
use crate::error::Result;
use crate::graph::CausalDag;
use crate::predictors::{auroc, fit_logistic, Predictor};
use crate::rng::derive_seed;
use crate::scalar::sample_variance;
use crate::sem::{simulate, Dataset, FittedSem, SemSpec};
use crate::stability::NormalizationPlan;

/// Fitted form of the outcome equation: an intercept, linear effects of the
/// target condition and the chronic condition, and an exponential decay in
/// treatment timing.
pub(crate) const OUTCOME_TEMPLATE: &str = "const + T + C + expdecay(A)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HospitalModel {
    /// Logistic regression on the raw Y, A, C.
    Baseline,
    /// Logistic regression on the counterfactual outcome only.
    Cfn,
    /// Logistic regression on the counterfactual outcome plus Y, A, C.
    CfnVuln,
}

impl HospitalModel {
    pub const ALL: [HospitalModel; 3] = [HospitalModel::Baseline, HospitalModel::Cfn, HospitalModel::CfnVuln];

    pub fn name(self) -> &'static str {
        match self {
            HospitalModel::Baseline => "baseline",
            HospitalModel::Cfn => "cfn",
            HospitalModel::CfnVuln => "cfn-vuln",
        }
    }
}

impl fmt::Display for HospitalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Feature sets whose class-boundary complexity is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSet {
    /// Y, A, C: the baseline model's inputs.
    Baseline,
    /// The counterfactual outcome alone.
    Cfn,
    /// The raw outcome Y alone, for comparison on the same one-dimensional scale.
    OutcomeOnly,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::Baseline, FeatureSet::Cfn, FeatureSet::OutcomeOnly];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Baseline => "baseline",
            FeatureSet::Cfn => "cfn",
            FeatureSet::OutcomeOnly => "outcome-only",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AurocRow {
    pub replicate: usize,
    pub model: HospitalModel,
    pub source: f64,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityRow {
    pub replicate: usize,
    pub features: FeatureSet,
    pub report: ComplexityReport<f64>,
}

/// Per-class spread of the outcome before and after normalization, on training rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRow {
    pub replicate: usize,
    pub class: u8,
    pub outcome: f64,
    pub counterfactual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossHospitalResult {
    pub auroc: Vec<AurocRow>,
    pub complexity: Vec<ComplexityRow>,
    pub variance: Vec<VarianceRow>,
    /// Fitted outcome-equation parameters per replicate, template order.
    pub outcome_fits: Vec<Vec<f64>>,
}

impl CrossHospitalResult {
    /// Mean `(source, target)` AUROC over replicates.
    pub fn mean_auroc(&self, model: HospitalModel) -> (f64, f64) {
        let rows = || self.auroc.iter().filter(move |r| r.model == model);
        (mean_of(rows().map(|r| r.source)), mean_of(rows().map(|r| r.target)))
    }

    /// Mean `(fisher, distance ratio, mst fraction)` over replicates.
    pub fn mean_complexity(&self, features: FeatureSet) -> (f64, f64, f64) {
        let rows = || self.complexity.iter().filter(move |r| r.features == features).map(|r| r.report);
        (mean_of(rows().map(|r| r.fisher)), mean_of(rows().map(|r| r.distance_ratio)), mean_of(rows().map(|r| r.mst)))
    }

    fn report(&self, replicate: usize, features: FeatureSet) -> Option<ComplexityReport<f64>> {
        self.complexity.iter().find(|r| r.replicate == replicate && r.features == features).map(|r| r.report)
    }

    /// Replicates in which the counterfactual feature has a higher Fisher ratio
    /// and a lower MST fraction and distance ratio than `reference`.
    pub fn simpler_than(&self, reference: FeatureSet) -> usize {
        let replicates = self.outcome_fits.len();
        (0..replicates)
            .filter(|&i| match (self.report(i, FeatureSet::Cfn), self.report(i, reference)) {
                (Some(c), Some(b)) => c.fisher > b.fisher && c.mst < b.mst && c.distance_ratio < b.distance_ratio,
                _ => false,
            })
            .count()
    }

    /// Replicates in which both classes have lower counterfactual than outcome variance.
    pub fn variance_reduced(&self) -> usize {
        (0..self.outcome_fits.len())
            .filter(|&i| {
                let rows: Vec<_> = self.variance.iter().filter(|r| r.replicate == i).collect();
                !rows.is_empty() && rows.iter().all(|r| r.counterfactual < r.outcome)
            })
            .count()
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut auroc = Table::new("cross_hospital_auroc", &["replicate", "model", "source_auroc", "target_auroc"]);
        for r in &self.auroc {
            auroc.push(vec![r.replicate.to_string(), r.model.to_string(), num(r.source), num(r.target)]);
        }
        let mut auroc_means = Table::new("cross_hospital_auroc_means", &["model", "source_auroc", "target_auroc"]);
        for m in HospitalModel::ALL {
            let (s, t) = self.mean_auroc(m);
            auroc_means.push(vec![m.to_string(), num(s), num(t)]);
        }
        let mut complexity = Table::new(
            "cross_hospital_complexity",
            &["replicate", "features", "fisher", "mst", "distance_ratio", "n", "d"],
        );
        for r in &self.complexity {
            let mut row = vec![r.replicate.to_string(), r.features.to_string()];
            row.extend(r.report.to_csv_row().split(',').map(str::to_string));
            complexity.push(row);
        }
        let mut complexity_means =
            Table::new("cross_hospital_complexity_means", &["features", "fisher", "distance_ratio", "mst"]);
        for f in FeatureSet::ALL {
            let (fisher, distance, mst) = self.mean_complexity(f);
            complexity_means.push(vec![f.to_string(), num(fisher), num(distance), num(mst)]);
        }
        let mut variance = Table::new(
            "cross_hospital_variance",
            &["replicate", "class", "outcome_variance", "counterfactual_variance"],
        );
        for r in &self.variance {
            variance.push(vec![r.replicate.to_string(), r.class.to_string(), num(r.outcome), num(r.counterfactual)]);
        }
        let mut fits =
            Table::new("cross_hospital_outcome_fit", &["replicate", "intercept", "T", "C", "kappa", "lambda"]);
        for (i, p) in self.outcome_fits.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(p.iter().map(|&v| num(v)));
            fits.push(row);
        }
        vec![auroc, auroc_means, complexity, complexity_means, variance, fits]
    }

    pub fn summary(&self) -> String {
        let mut out = String::from("mean AUROC (source, target):\n");
        for m in HospitalModel::ALL {
            let (s, t) = self.mean_auroc(m);
            out.push_str(&format!("  {m}: {s:.3}, {t:.3}\n"));
        }
        out.push_str("mean complexity (fisher, distance ratio, mst):\n");
        for f in FeatureSet::ALL {
            let (a, b, c) = self.mean_complexity(f);
            out.push_str(&format!("  {f}: {a:.3}, {b:.3}, {c:.3}\n"));
        }
        let n = self.outcome_fits.len();
        out.push_str(&format!(
            "cfn simpler than baseline by all three measures in {}/{n} replicates\n",
            self.simpler_than(FeatureSet::Baseline)
        ));
        out.push_str(&format!(
            "counterfactual variance lower in both classes in {}/{n} replicates\n",
            self.variance_reduced()
        ));
        out
    }
}

pub(crate) struct Hospitals {
    pub graph: CausalDag,
    pub plan: NormalizationPlan,
    pub source: SemSpec<f64>,
    pub target: SemSpec<f64>,
}

impl Hospitals {
    pub fn load() -> Result<Self> {
        let graph = dag(scenarios::HOSPITAL_DAG)?;
        let plan = gate_plan(&graph, &["Y(A=∅,C=∅)"])?;
        Ok(Hospitals {
            graph,
            plan,
            source: sem(scenarios::HOSPITAL_SOURCE_SEM)?,
            target: sem(scenarios::HOSPITAL_TARGET_SEM)?,
        })
    }

    /// Full (unhidden) source and target samples for one replicate.
    pub fn simulate(&self, knobs: &HospitalKnobs, seed: u64) -> Result<(Dataset<f64>, Dataset<f64>)> {
        Ok((
            simulate(&self.source, &self.graph, knobs.source_samples, derive_seed(seed, "source"))?,
            simulate(&self.target, &self.graph, knobs.target_samples, derive_seed(seed, "target"))?,
        ))
    }

    pub fn counterfactual_name(&self) -> String {
        self.plan.recipes[0].counterfactual.name()
    }
}

fn class_variance(values: &[f64], labels: &[f64], class: f64) -> f64 {
    let xs: Vec<f64> = values.iter().zip(labels).filter(|(_, &l)| l == class).map(|(&v, _)| v).collect();
    sample_variance(&xs)
}

/// Simulates both hospitals, fits the outcome equation on source training rows,
/// normalizes the outcome at both hospitals, and compares the three classifiers
/// and the complexity of the feature sets.
pub fn exp_cross_hospital(config: &ExperimentConfig, knobs: &HospitalKnobs) -> Result<CrossHospitalResult> {
    let h = Hospitals::load()?;
    let cf = h.counterfactual_name();
    let per_replicate = replicates(config, |replicate, seed| {
        let (source, target) = h.simulate(knobs, seed)?;
        let (source, target) = (source.observed(), target.observed());
        let train = source.slice(0..knobs.train_samples);
        let fit: FittedSem<f64> = fit_recipe(&h.plan, &train, OUTCOME_TEMPLATE)?;
        let train = with_counterfactual(&train, &h.plan, &fit)?;
        let test = with_counterfactual(&source.slice(knobs.train_samples..knobs.source_samples), &h.plan, &fit)?;
        let target = with_counterfactual(&target, &h.plan, &fit)?;

        let mut aurocs = Vec::new();
        for model in HospitalModel::ALL {
            let features = match model {
                HospitalModel::Baseline => names(&["Y", "A", "C"]),
                HospitalModel::Cfn => vec![cf.clone()],
                HospitalModel::CfnVuln => vec![cf.clone(), "Y".into(), "A".into(), "C".into()],
            };
            let m = fit_logistic(&train, &features, "T")?;
            aurocs.push(AurocRow {
                replicate,
                model,
                source: auroc(&m.predict(&test)?, test.column("T")?)?,
                target: auroc(&m.predict(&target)?, target.column("T")?)?,
            });
        }

        let mut complexity = Vec::new();
        for features in FeatureSet::ALL {
            let cols = match features {
                FeatureSet::Baseline => names(&["Y", "A", "C"]),
                FeatureSet::Cfn => vec![cf.clone()],
                FeatureSet::OutcomeOnly => names(&["Y"]),
            };
            let points = LabeledPointSet::from_dataset(&train, &cols, "T")?;
            complexity.push(ComplexityRow { replicate, features, report: ComplexityReport::compute(&points, false)? });
        }

        let (y, c, t) = (train.column("Y")?, train.column(&cf)?, train.column("T")?);
        let variance = [0u8, 1]
            .into_iter()
            .map(|class| VarianceRow {
                replicate,
                class,
                outcome: class_variance(y, t, f64::from(class)),
                counterfactual: class_variance(c, t, f64::from(class)),
            })
            .collect::<Vec<_>>();
        Ok((aurocs, complexity, variance, fit.params()))
    })?;

    let mut result = CrossHospitalResult {
        auroc: Vec::new(),
        complexity: Vec::new(),
        variance: Vec::new(),
        outcome_fits: Vec::new(),
    };
    for (a, c, v, p) in per_replicate {
        result.auroc.extend(a);
        result.complexity.extend(c);
        result.variance.extend(v);
        result.outcome_fits.push(p);
    }
    Ok(result)
}
