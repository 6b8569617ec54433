use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{least_squares, solve_spd};
use crate::scalar::{mean, sample_variance, Scalar};
use crate::sem::Dataset;

/// A fitted model producing one score per row.
pub trait Predictor<T: Scalar> {
    fn features(&self) -> &[String];

    /// Scores from the feature columns, which may come in any order.
    fn predict(&self, data: &Dataset<T>) -> Result<Vec<T>>;
}

fn linear_predictor<T: Scalar>(
    features: &[String],
    intercept: T,
    coefficients: &[T],
    data: &Dataset<T>,
) -> Result<Vec<T>> {
    let mut out = vec![intercept; data.n_rows()];
    for (f, &b) in features.iter().zip(coefficients) {
        out.iter_mut().zip(data.column(f)?).for_each(|(o, &x)| *o += b * x);
    }
    Ok(out)
}

fn columns<'a, T: Scalar>(data: &'a Dataset<T>, features: &[String]) -> Result<Vec<&'a [T]>> {
    features.iter().map(|f| data.column(f)).collect()
}

/// Ordinary least squares model `intercept + x . coefficients`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    pub features: Vec<String>,
    pub intercept: T,
    pub coefficients: Vec<T>,
}

impl<T: Scalar> Predictor<T> for LinearModel<T> {
    fn features(&self) -> &[String] {
        &self.features
    }

    fn predict(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        linear_predictor(&self.features, self.intercept, &self.coefficients, data)
    }
}

/// Least squares with an intercept, solved by Householder QR.
pub fn fit_least_squares<T: Scalar>(data: &Dataset<T>, features: &[String], target: &str) -> Result<LinearModel<T>> {
    let y = data.column(target)?;
    let xs = columns(data, features)?;
    if y.len() <= features.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows cannot determine {} coefficients and an intercept",
            y.len(),
            features.len()
        )));
    }
    let ones = vec![T::one(); y.len()];
    let mut design: Vec<&[T]> = vec![&ones];
    design.extend(xs);
    let b = least_squares(&design, y).map_err(|c| Error::RankDeficient {
        columns: c
            .depends_on
            .iter()
            .chain(std::iter::once(&c.column))
            .map(|&i| if i == 0 { "intercept".to_string() } else { features[i - 1].clone() })
            .collect(),
    })?;
    Ok(LinearModel { features: features.to_vec(), intercept: b[0], coefficients: b[1..].to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticDiagnostics<T> {
    pub converged: bool,
    /// Coefficients diverged: the classes are (quasi-)separable.
    pub separated: bool,
    pub iterations: usize,
    /// Infinity norm of the mean log-likelihood gradient at the returned point.
    pub gradient_norm: T,
    /// Mean negative log-likelihood before the first and after every iteration.
    pub objective: Vec<T>,
}

/// Logistic regression `P(y = 1 | x) = sigmoid(intercept + x . coefficients)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel<T> {
    pub features: Vec<String>,
    pub intercept: T,
    pub coefficients: Vec<T>,
    pub diagnostics: LogisticDiagnostics<T>,
}

impl<T: Scalar> Predictor<T> for LogisticModel<T> {
    fn features(&self) -> &[String] {
        &self.features
    }

    fn predict(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        Ok(linear_predictor(&self.features, self.intercept, &self.coefficients, data)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions<T> {
    /// Ridge penalty on the standardized coefficients (not the intercept).
    pub l2: T,
    pub max_iterations: usize,
    /// Convergence threshold on the gradient infinity norm.
    pub tolerance: T,
}

impl<T: Scalar> Default for LogisticOptions<T> {
    fn default() -> Self {
        // 1e-8, or ten machine epsilons for types where 1e-8 is below rounding.
        let tolerance = T::of(1e-8).max(T::epsilon() * T::of(10.0));
        LogisticOptions { l2: T::zero(), max_iterations: 100, tolerance }
    }
}

/// Mean negative log-likelihood of `(intercept, coefficients)` on the given columns,
/// plus `l2 / 2 * |coefficients|^2 / n`.
pub fn logistic_nll<T: Scalar>(columns: &[&[T]], y: &[T], intercept: T, coefficients: &[T], l2: T) -> T {
    let n = T::of_usize(y.len());
    let mut total = T::zero();
    for i in 0..y.len() {
        let z = intercept + columns.iter().zip(coefficients).map(|(c, &b)| c[i] * b).sum::<T>();
        total += softplus(z) - y[i] * z;
    }
    let penalty: T = coefficients.iter().map(|&b| b * b).sum::<T>() * l2 / T::of(2.0);
    (total + penalty) / n
}

/// Gradient of [`logistic_nll`], intercept first.
pub fn logistic_gradient<T: Scalar>(columns: &[&[T]], y: &[T], intercept: T, coefficients: &[T], l2: T) -> Vec<T> {
    let n = T::of_usize(y.len());
    let mut g = vec![T::zero(); coefficients.len() + 1];
    for i in 0..y.len() {
        let z = intercept + columns.iter().zip(coefficients).map(|(c, &b)| c[i] * b).sum::<T>();
        let r = sigmoid(z) - y[i];
        g[0] += r;
        for (gj, c) in g[1..].iter_mut().zip(columns) {
            *gj += r * c[i];
        }
    }
    for (gj, &b) in g[1..].iter_mut().zip(coefficients) {
        *gj += l2 * b;
    }
    g.iter().map(|&v| v / n).collect()
}

const MAX_HALVINGS: usize = 40;

/// Unpenalized logistic regression with an intercept.
pub fn fit_logistic<T: Scalar>(data: &Dataset<T>, features: &[String], target: &str) -> Result<LogisticModel<T>> {
    fit_logistic_with(data, features, target, LogisticOptions::default())
}

/// Newton–Raphson with step halving on the mean negative log-likelihood. Features
/// are standardized internally and the coefficients mapped back to raw scale.
pub fn fit_logistic_with<T: Scalar>(
    data: &Dataset<T>,
    features: &[String],
    target: &str,
    options: LogisticOptions<T>,
) -> Result<LogisticModel<T>> {
    let y = data.column(target)?;
    if let Some(l) = y.iter().find(|&&l| l != T::zero() && l != T::one()) {
        return Err(Error::InvalidInput(format!("label {l} is not 0 or 1")));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass);
    }
    if y.len() <= features.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "{} rows cannot determine {} coefficients and an intercept",
            y.len(),
            features.len()
        )));
    }
    let raw = columns(data, features)?;
    let centers: Vec<T> = raw.iter().map(|c| mean(c)).collect();
    let scales: Vec<T> = raw.iter().map(|c| sample_variance(c).sqrt()).collect();
    if let Some(j) = scales.iter().position(|&s| s == T::zero()) {
        return Err(Error::RankDeficient { columns: vec!["intercept".into(), features[j].clone()] });
    }
    let z: Vec<Vec<T>> = raw
        .iter()
        .zip(centers.iter().zip(&scales))
        .map(|(c, (&m, &s))| c.iter().map(|&v| (v - m) / s).collect())
        .collect();
    let cols: Vec<&[T]> = z.iter().map(Vec::as_slice).collect();
    let ones = vec![T::one(); y.len()];
    let mut with_intercept: Vec<&[T]> = vec![&ones];
    with_intercept.extend(&cols);
    // Full column rank of the standardized design is needed for a unique optimum.
    least_squares(&with_intercept, y).map_err(|c| Error::RankDeficient {
        columns: c
            .depends_on
            .iter()
            .chain(std::iter::once(&c.column))
            .map(|&i| if i == 0 { "intercept".to_string() } else { features[i - 1].clone() })
            .collect(),
    })?;

    let p = features.len();
    let n = T::of_usize(y.len());
    let mut theta = vec![T::zero(); p + 1];
    let base_rate = mean(y);
    theta[0] = (base_rate / (T::one() - base_rate)).ln();
    let nll = |t: &[T]| logistic_nll(&cols, y, t[0], &t[1..], options.l2);
    let mut objective = vec![nll(&theta)];
    let mut converged = false;
    let mut iterations = 0;
    let mut grad = logistic_gradient(&cols, y, theta[0], &theta[1..], options.l2);
    while iterations < options.max_iterations {
        if inf_norm(&grad) < options.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let hessian = mean_hessian(&with_intercept, y.len(), &theta, options.l2 / n);
        let Some(step) = solve_spd(&hessian, &grad) else {
            break;
        };
        let current = *objective.last().expect("nonempty");
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<T> = theta.iter().zip(&step).map(|(&a, &s)| a - t * s).collect();
            let value = nll(&trial);
            if value <= current {
                accepted = Some((trial, value));
                break;
            }
            t *= T::of(0.5);
        }
        let Some((trial, value)) = accepted else {
            break;
        };
        theta = trial;
        objective.push(value);
        grad = logistic_gradient(&cols, y, theta[0], &theta[1..], options.l2);
    }
    let gradient_norm = inf_norm(&grad);
    converged |= gradient_norm < options.tolerance;
    // Under separation the likelihood approaches 1 as the coefficients grow, and the
    // gradient can vanish numerically before they stop growing.
    let final_nll = *objective.last().expect("nonempty");
    let separated = (options.l2 == T::zero() && final_nll < T::epsilon().sqrt())
        || (!converged && theta.iter().any(|v| v.abs() > T::of(1e3)));
    converged &= !separated;

    let coefficients: Vec<T> = theta[1..].iter().zip(&scales).map(|(&b, &s)| b / s).collect();
    let intercept = theta[0] - coefficients.iter().zip(&centers).map(|(&b, &m)| b * m).sum::<T>();
    Ok(LogisticModel {
        features: features.to_vec(),
        intercept,
        coefficients,
        diagnostics: LogisticDiagnostics { converged, separated, iterations, gradient_norm, objective },
    })
}

fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// `X' W X / n + ridge` on the non-intercept diagonal, row-major.
fn mean_hessian<T: Scalar>(design: &[&[T]], n: usize, theta: &[T], ridge: T) -> Vec<T> {
    let k = design.len();
    let mut h = vec![T::zero(); k * k];
    for i in 0..n {
        let z: T = design.iter().zip(theta).map(|(c, &b)| c[i] * b).sum();
        let s = sigmoid(z);
        let w = s * (T::one() - s);
        for a in 0..k {
            let wa = w * design[a][i];
            for b in 0..=a {
                h[a * k + b] += wa * design[b][i];
            }
        }
    }
    let nn = T::of_usize(n);
    for a in 0..k {
        for b in 0..=a {
            h[a * k + b] /= nn;
            h[b * k + a] = h[a * k + b];
        }
        if a > 0 {
            h[a * k + a] += ridge;
        }
    }
    h
}

/// Either fitted model, for serialization.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Linear(LinearModel<T>),
    Logistic(LogisticModel<T>),
}

impl<T: Scalar> fmt::Display for Model<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, features, intercept, coefficients) = match self {
            Model::Linear(m) => ("linear", &m.features, m.intercept, &m.coefficients),
            Model::Logistic(m) => ("logistic", &m.features, m.intercept, &m.coefficients),
        };
        writeln!(f, "model {kind}")?;
        writeln!(f, "intercept {intercept}")?;
        for (name, b) in features.iter().zip(coefficients) {
            writeln!(f, "coef {name} {b}")?;
        }
        if let Model::Logistic(m) = self {
            let d = &m.diagnostics;
            writeln!(f, "converged {}", d.converged)?;
            writeln!(f, "separated {}", d.separated)?;
            writeln!(f, "iterations {}", d.iterations)?;
            writeln!(f, "gradient_norm {}", d.gradient_norm)?;
            let obj: Vec<String> = d.objective.iter().map(ToString::to_string).collect();
            writeln!(f, "objective {}", obj.join(" "))?;
        }
        Ok(())
    }
}

impl<T: Scalar> Model<T> {
    /// Parses the output of `Display`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut intercept = None;
        let mut features = Vec::new();
        let mut coefficients = Vec::new();
        let mut d = LogisticDiagnostics {
            converged: false,
            separated: false,
            iterations: 0,
            gradient_norm: T::zero(),
            objective: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let err = |m: String| Error::Parse { line: i + 1, message: m };
            let num = |s: &str| s.parse::<T>().map_err(|_| err(format!("not a number: `{s}`")));
            let flag = |s: &str| s.parse::<bool>().map_err(|_| err(format!("not a boolean: `{s}`")));
            let words: Vec<&str> = raw.split_whitespace().collect();
            match words.as_slice() {
                [] => {}
                ["model", k @ ("linear" | "logistic")] => kind = Some(*k),
                ["intercept", v] => intercept = Some(num(v)?),
                ["coef", name, v] => {
                    features.push(name.to_string());
                    coefficients.push(num(v)?);
                }
                ["converged", v] => d.converged = flag(v)?,
                ["separated", v] => d.separated = flag(v)?,
                ["iterations", v] => d.iterations = v.parse().map_err(|_| err(format!("not a count: `{v}`")))?,
                ["gradient_norm", v] => d.gradient_norm = num(v)?,
                ["objective", vs @ ..] => d.objective = vs.iter().map(|v| num(v)).collect::<Result<_>>()?,
                _ => return Err(err(format!("unrecognized line `{raw}`"))),
            }
        }
        let missing = |what: &str| Error::Parse { line: 0, message: format!("missing `{what}` line") };
        let intercept = intercept.ok_or_else(|| missing("intercept"))?;
        match kind.ok_or_else(|| missing("model"))? {
            "linear" => Ok(Model::Linear(LinearModel { features, intercept, coefficients })),
            _ => Ok(Model::Logistic(LogisticModel { features, intercept, coefficients, diagnostics: d })),
        }
    }
}
