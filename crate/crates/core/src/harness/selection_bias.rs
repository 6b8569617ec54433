use std::fmt;

use rand::seq::SliceRandom;

use super::config::{ExperimentConfig, SelectionBiasKnobs};
use super::table::{num, Table};
use super::{dag, fit_recipe, gate_plan, mean_of, names, replicates, scenarios, sem, with_counterfactual};
use crate::error::Result;
use crate::predictors::{auprc, auroc, fit_logistic, Predictor};
use crate::rng::{derive_seed, stream};
use crate::sem::{reject_sample, simulate, RowPredicate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionModel {
    /// Logistic regression on Y and C.
    Baseline,
    /// Logistic regression on the counterfactual Y(C=∅).
    Cfn,
}

impl SelectionModel {
    pub const ALL: [SelectionModel; 2] = [SelectionModel::Baseline, SelectionModel::Cfn];

    pub fn name(self) -> &'static str {
        match self {
            SelectionModel::Baseline => "baseline",
            SelectionModel::Cfn => "cfn",
        }
    }
}

impl fmt::Display for SelectionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalSplit {
    /// Held-out rows that went through the same selection as the training rows.
    Biased,
    /// Rows held out before selection.
    Unbiased,
}

impl EvalSplit {
    pub const ALL: [EvalSplit; 2] = [EvalSplit::Biased, EvalSplit::Unbiased];

    pub fn name(self) -> &'static str {
        match self {
            EvalSplit::Biased => "biased",
            EvalSplit::Unbiased => "unbiased",
        }
    }
}

impl fmt::Display for EvalSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRow {
    pub replicate: usize,
    pub model: SelectionModel,
    pub split: EvalSplit,
    pub auroc: f64,
    pub auprc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionBiasResult {
    pub replicates: usize,
    pub rows: Vec<SelectionRow>,
}

impl SelectionBiasResult {
    fn row(&self, replicate: usize, model: SelectionModel, split: EvalSplit) -> Option<&SelectionRow> {
        self.rows.iter().find(|r| r.replicate == replicate && r.model == model && r.split == split)
    }

    pub fn mean_auprc(&self, model: SelectionModel, split: EvalSplit) -> f64 {
        mean_of(self.rows.iter().filter(|r| r.model == model && r.split == split).map(|r| r.auprc))
    }

    pub fn mean_auroc(&self, model: SelectionModel, split: EvalSplit) -> f64 {
        mean_of(self.rows.iter().filter(|r| r.model == model && r.split == split).map(|r| r.auroc))
    }

    /// |AUPRC(biased) − AUPRC(unbiased)| of `model` in `replicate`.
    pub fn auprc_gap(&self, replicate: usize, model: SelectionModel) -> Option<f64> {
        let b = self.row(replicate, model, EvalSplit::Biased)?;
        let u = self.row(replicate, model, EvalSplit::Unbiased)?;
        Some((b.auprc - u.auprc).abs())
    }

    /// Replicates in which the counterfactual model's AUPRC gap is smaller.
    pub fn cfn_gap_smaller(&self) -> usize {
        (0..self.replicates)
            .filter(|&i| match (self.auprc_gap(i, SelectionModel::Cfn), self.auprc_gap(i, SelectionModel::Baseline)) {
                (Some(c), Some(b)) => c < b,
                _ => false,
            })
            .count()
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut all = Table::new("selection_bias", &["replicate", "model", "split", "auroc", "auprc"]);
        for r in &self.rows {
            all.push(vec![
                r.replicate.to_string(),
                r.model.to_string(),
                r.split.to_string(),
                num(r.auroc),
                num(r.auprc),
            ]);
        }
        let mut means = Table::new("selection_bias_means", &["model", "split", "auroc", "auprc"]);
        for model in SelectionModel::ALL {
            for split in EvalSplit::ALL {
                means.push(vec![
                    model.to_string(),
                    split.to_string(),
                    num(self.mean_auroc(model, split)),
                    num(self.mean_auprc(model, split)),
                ]);
            }
        }
        vec![all, means]
    }

    pub fn summary(&self) -> String {
        let mut out = String::from("mean AUPRC (biased, unbiased):\n");
        for model in SelectionModel::ALL {
            out.push_str(&format!(
                "  {model}: {:.3}, {:.3}\n",
                self.mean_auprc(model, EvalSplit::Biased),
                self.mean_auprc(model, EvalSplit::Unbiased)
            ));
        }
        out.push_str(&format!("cfn gap smaller in {}/{} replicates\n", self.cfn_gap_smaller(), self.replicates));
        out
    }
}

/// Holds out an unbiased sample, rejection-samples the rest on
/// `C = 1 and T = 0`, trains on part of the selected rows, and evaluates the
/// baseline and counterfactual classifiers on selected and unselected rows.
pub fn exp_selection_bias(config: &ExperimentConfig, knobs: &SelectionBiasKnobs) -> Result<SelectionBiasResult> {
    let graph = dag(scenarios::SELECTION_DAG)?;
    let plan = gate_plan(&graph, &["Y(C=∅)"])?;
    let spec = sem(scenarios::SELECTION_SEM)?;
    let cf = plan.recipes[0].counterfactual.name();
    let reject = RowPredicate::equals("C", 1.0).and(RowPredicate::equals("T", 0.0));

    let per_replicate = replicates(config, |replicate, seed| {
        let population = simulate(&spec, &graph, knobs.population, derive_seed(seed, "population"))?;
        let mut order: Vec<usize> = (0..knobs.population).collect();
        order.shuffle(&mut stream(seed, "split"));
        let held = (knobs.population as f64 * knobs.unbiased_fraction).round() as usize;
        let unbiased = population.rows(&order[..held]);
        let selected = reject_sample(
            &population.rows(&order[held..]),
            &reject,
            knobs.rejection_probability,
            derive_seed(seed, "selection"),
        )?;
        let n_train = (selected.n_rows() as f64 * knobs.train_fraction).round() as usize;
        let train = selected.slice(0..n_train);
        let fit = fit_recipe(&plan, &train, "const + T + C")?;
        let train = with_counterfactual(&train, &plan, &fit)?;
        let biased = with_counterfactual(&selected.slice(n_train..selected.n_rows()), &plan, &fit)?;
        let unbiased = with_counterfactual(&unbiased, &plan, &fit)?;

        let mut rows = Vec::with_capacity(4);
        for model in SelectionModel::ALL {
            let features = match model {
                SelectionModel::Baseline => names(&["Y", "C"]),
                SelectionModel::Cfn => vec![cf.clone()],
            };
            let m = fit_logistic(&train, &features, "T")?;
            for (split, data) in [(EvalSplit::Biased, &biased), (EvalSplit::Unbiased, &unbiased)] {
                let (scores, labels) = (m.predict(data)?, data.column("T")?);
                rows.push(SelectionRow {
                    replicate,
                    model,
                    split,
                    auroc: auroc(&scores, labels)?,
                    auprc: auprc(&scores, labels)?,
                });
            }
        }
        Ok(rows)
    })?;
    Ok(SelectionBiasResult { replicates: config.replicates, rows: per_replicate.concat() })
}
