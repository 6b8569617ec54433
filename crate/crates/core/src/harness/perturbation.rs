use std::fmt;

use rand_distr::{Distribution, Normal};

use super::config::{ExperimentConfig, PerturbationKnobs};
use super::cross_hospital::Hospitals;
use super::table::{num, Table};
use super::{mean_of, replicates};
use crate::error::{Error, Result};
use crate::predictors::{auroc, fit_logistic, mse, Predictor};
use crate::rng::stream;
use crate::sem::{true_counterfactual, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerturbedModel {
    /// Logistic regression on the perturbed counterfactual only.
    WithoutVulnerable,
    /// Logistic regression on the perturbed counterfactual plus C, A, Y.
    WithVulnerable,
}

impl PerturbedModel {
    pub const ALL: [PerturbedModel; 2] = [PerturbedModel::WithoutVulnerable, PerturbedModel::WithVulnerable];

    pub fn name(self) -> &'static str {
        match self {
            PerturbedModel::WithoutVulnerable => "without-vuln",
            PerturbedModel::WithVulnerable => "with-vuln",
        }
    }
}

impl fmt::Display for PerturbedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationRow {
    pub replicate: usize,
    pub sigma: f64,
    pub model: PerturbedModel,
    pub source_auroc: f64,
    pub target_auroc: f64,
    /// Mean squared difference between perturbed and true counterfactual on source rows.
    pub counterfactual_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationResult {
    pub sigmas: Vec<f64>,
    pub rows: Vec<PerturbationRow>,
}

impl PerturbationResult {
    /// `(sigma, mean source AUROC, mean target AUROC)` along the grid.
    pub fn mean_curve(&self, model: PerturbedModel) -> Vec<(f64, f64, f64)> {
        self.sigmas
            .iter()
            .map(|&s| {
                let rows = || self.rows.iter().filter(move |r| r.model == model && r.sigma == s);
                (s, mean_of(rows().map(|r| r.source_auroc)), mean_of(rows().map(|r| r.target_auroc)))
            })
            .collect()
    }

    /// Mean over the grid of |source − target| of the mean AUROCs.
    pub fn mean_gap(&self, model: PerturbedModel) -> f64 {
        mean_of(self.mean_curve(model).iter().map(|c| (c.1 - c.2).abs()))
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut all = Table::new(
            "perturbation_auroc",
            &["replicate", "sigma", "model", "source_auroc", "target_auroc", "counterfactual_mse"],
        );
        for r in &self.rows {
            all.push(vec![
                r.replicate.to_string(),
                num(r.sigma),
                r.model.to_string(),
                num(r.source_auroc),
                num(r.target_auroc),
                num(r.counterfactual_mse),
            ]);
        }
        let mut means =
            Table::new("perturbation_means", &["sigma", "model", "source_auroc", "target_auroc", "counterfactual_mse"]);
        for model in PerturbedModel::ALL {
            for (s, src, tgt) in self.mean_curve(model) {
                let m = mean_of(
                    self.rows.iter().filter(|r| r.model == model && r.sigma == s).map(|r| r.counterfactual_mse),
                );
                means.push(vec![num(s), model.to_string(), num(src), num(tgt), num(m)]);
            }
        }
        vec![all, means]
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for model in PerturbedModel::ALL {
            let curve = self.mean_curve(model);
            let (first, last) = (curve[0], curve[curve.len() - 1]);
            out.push_str(&format!(
                "{model}: mean |source − target| {:.4}; sigma {}: {:.3}/{:.3}; sigma {}: {:.3}/{:.3}\n",
                self.mean_gap(model),
                first.0,
                first.1,
                first.2,
                last.0,
                last.1,
                last.2
            ));
        }
        out
    }
}

fn perturbed(truth: &[f64], noise: &Normal<f64>, rng: &mut impl rand::Rng) -> Vec<f64> {
    truth.iter().map(|&v| v + noise.sample(rng)).collect()
}

/// Adds Gaussian noise of increasing scale to the true counterfactual outcome
/// and compares classifiers with and without the vulnerable variables.
pub fn exp_perturbation(config: &ExperimentConfig, knobs: &PerturbationKnobs) -> Result<PerturbationResult> {
    let h = Hospitals::load()?;
    let cf = &h.plan.recipes[0].counterfactual;
    let name = cf.name();
    let hk = &knobs.hospital;
    let sigmas = knobs.grid();

    let per_replicate = replicates(config, |replicate, seed| {
        let (source, target) = h.simulate(hk, seed)?;
        let source_truth = true_counterfactual(&h.source, &source, cf)?;
        let target_truth = true_counterfactual(&h.target, &target, cf)?;
        let (source, target) = (source.observed(), target.observed());
        let mut rows = Vec::with_capacity(sigmas.len() * 2);
        for (k, &sigma) in sigmas.iter().enumerate() {
            let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let mut rng = stream(seed, &format!("perturb/{k}"));
            let src_cf = perturbed(&source_truth, &noise, &mut rng);
            let tgt_cf = perturbed(&target_truth, &noise, &mut rng);
            let cf_mse = mse(&src_cf, &source_truth)?;
            let src: Dataset<f64> = source.clone().with_column(name.as_str(), src_cf)?;
            let tgt = target.clone().with_column(name.as_str(), tgt_cf)?;
            let train = src.slice(0..hk.train_samples);
            let test = src.slice(hk.train_samples..hk.source_samples);
            for model in PerturbedModel::ALL {
                let features = match model {
                    PerturbedModel::WithoutVulnerable => vec![name.clone()],
                    PerturbedModel::WithVulnerable => vec![name.clone(), "C".into(), "A".into(), "Y".into()],
                };
                let m = fit_logistic(&train, &features, "T")?;
                rows.push(PerturbationRow {
                    replicate,
                    sigma,
                    model,
                    source_auroc: auroc(&m.predict(&test)?, test.column("T")?)?,
                    target_auroc: auroc(&m.predict(&tgt)?, tgt.column("T")?)?,
                    counterfactual_mse: cf_mse,
                });
            }
        }
        Ok(rows)
    })?;
    Ok(PerturbationResult { sigmas, rows: per_replicate.concat() })
}
