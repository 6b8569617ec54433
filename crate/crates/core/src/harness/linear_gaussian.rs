use std::fmt;

use rand_distr::{Distribution, StandardNormal};

use super::config::{ExperimentConfig, LinearGaussianKnobs};
use super::table::{num, Table};
use super::{dag, fit_recipe, gate_plan, mean_of, names, replicates, scenarios, sem, with_counterfactual};
use crate::error::Result;
use crate::linalg::least_squares;
use crate::predictors::{fit_least_squares, mse, LinearModel, Predictor};
use crate::rng::{derive_seed, stream};
use crate::sem::{simulate, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinearModelKind {
    /// Least squares of T on the vulnerable C and Y.
    Naive,
    /// Least squares of T on C, Y and the confounder D, which no real model can see.
    Ideal,
    /// Least squares of T on the estimated counterfactual Y(C=∅).
    Cfn,
}

impl LinearModelKind {
    pub const ALL: [LinearModelKind; 3] = [LinearModelKind::Naive, LinearModelKind::Ideal, LinearModelKind::Cfn];

    pub fn name(self) -> &'static str {
        match self {
            LinearModelKind::Naive => "naive",
            LinearModelKind::Ideal => "ideal",
            LinearModelKind::Cfn => "cfn",
        }
    }
}

impl fmt::Display for LinearModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseRow {
    pub replicate: usize,
    pub w2: f64,
    pub model: LinearModelKind,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianResult {
    pub train_w2: f64,
    /// `(w1, w3, w4)` per replicate.
    pub weights: Vec<[f64; 3]>,
    pub rows: Vec<MseRow>,
}

impl LinearGaussianResult {
    /// `(w2, MSE averaged over replicates)` along the grid.
    pub fn mean_curve(&self, model: LinearModelKind) -> Vec<(f64, f64)> {
        let mut grid: Vec<f64> = Vec::new();
        for r in self.rows.iter().filter(|r| r.model == model && r.replicate == 0) {
            grid.push(r.w2);
        }
        grid.into_iter()
            .map(|w2| (w2, mean_of(self.rows.iter().filter(|r| r.model == model && r.w2 == w2).map(|r| r.mse))))
            .collect()
    }

    /// Largest over smallest mean MSE across the grid.
    pub fn max_min_ratio(&self, model: LinearModelKind) -> f64 {
        let curve = self.mean_curve(model);
        let max = curve.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let min = curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        max / min
    }

    /// R² of the least-squares quadratic in `w2 - train_w2` through the mean MSE curve.
    pub fn quadratic_r2(&self, model: LinearModelKind) -> f64 {
        let curve = self.mean_curve(model);
        let x: Vec<f64> = curve.iter().map(|c| c.0 - self.train_w2).collect();
        let y: Vec<f64> = curve.iter().map(|c| c.1).collect();
        let ones = vec![1.0; x.len()];
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        let Ok(beta) = least_squares(&[&ones, &x, &sq], &y) else {
            return f64::NAN;
        };
        let m = mean_of(y.iter().copied());
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for i in 0..y.len() {
            let fit = beta[0] + beta[1] * x[i] + beta[2] * sq[i];
            ss_res += (y[i] - fit).powi(2);
            ss_tot += (y[i] - m).powi(2);
        }
        1.0 - ss_res / ss_tot
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut mse = Table::new("linear_gaussian_mse", &["replicate", "w2", "model", "mse"]);
        for r in &self.rows {
            mse.push(vec![r.replicate.to_string(), num(r.w2), r.model.to_string(), num(r.mse)]);
        }
        let mut weights = Table::new("linear_gaussian_weights", &["replicate", "w1", "w3", "w4"]);
        for (i, w) in self.weights.iter().enumerate() {
            weights.push(vec![i.to_string(), num(w[0]), num(w[1]), num(w[2])]);
        }
        vec![mse, weights]
    }

    pub fn summary(&self) -> String {
        LinearModelKind::ALL
            .iter()
            .map(|&m| {
                format!(
                    "{m}: max/min MSE ratio {:.4}, quadratic R² {:.4}\n",
                    self.max_min_ratio(m),
                    self.quadratic_r2(m)
                )
            })
            .collect()
    }
}

/// Trains the three regressors at `train_w2` and evaluates them on every test
/// domain. All test domains share one seed, so they differ only through `w2`.
pub fn exp_linear_gaussian(config: &ExperimentConfig, knobs: &LinearGaussianKnobs) -> Result<LinearGaussianResult> {
    let graph = dag(scenarios::SCREENING_DAG)?;
    let plan = gate_plan(&graph, &["Y(C=∅)"])?;
    let cf = plan.recipes[0].counterfactual.name();
    let grid = knobs.grid();

    let per_replicate = replicates(config, |replicate, seed| {
        let mut rng = stream(seed, "weights");
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let (w1, w3, w4) = (draw(), draw(), draw());
        let spec = |w2: f64| sem(&scenarios::screening_sem(w1, w2, w3, w4, knobs.noise_sd));

        let train = simulate(&spec(knobs.train_w2)?, &graph, knobs.samples, derive_seed(seed, "train"))?;
        let fit = fit_recipe(&plan, &train.observed(), "T + C")?;
        let train = with_counterfactual(&train, &plan, &fit)?;
        let models: Vec<(LinearModelKind, LinearModel<f64>)> = vec![
            (LinearModelKind::Naive, fit_least_squares(&train, &names(&["C", "Y"]), "T")?),
            (LinearModelKind::Ideal, fit_least_squares(&train, &names(&["C", "Y", "D"]), "T")?),
            (LinearModelKind::Cfn, fit_least_squares(&train, std::slice::from_ref(&cf), "T")?),
        ];

        let test_seed = derive_seed(seed, "test");
        let mut rows = Vec::with_capacity(grid.len() * models.len());
        for &w2 in &grid {
            let test: Dataset<f64> = simulate(&spec(w2)?, &graph, knobs.samples, test_seed)?;
            let test = with_counterfactual(&test, &plan, &fit)?;
            let truth = test.column("T")?;
            for (kind, model) in &models {
                rows.push(MseRow { replicate, w2, model: *kind, mse: mse(&model.predict(&test)?, truth)? });
            }
        }
        Ok(([w1, w3, w4], rows))
    })?;

    let (weights, rows): (Vec<_>, Vec<_>) = per_replicate.into_iter().unzip();
    Ok(LinearGaussianResult { train_w2: knobs.train_w2, weights, rows: rows.concat() })
}
