use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use super::dataset::Dataset;
use super::spec::{Law, Noise, Term};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::rng::stream;
use crate::scalar::Scalar;

/// Shape of one term to be estimated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TermKind {
    Constant,
    Linear(String),
    ExpDecay(String),
}

impl TermKind {
    pub fn parent(&self) -> Option<&str> {
        match self {
            TermKind::Constant => None,
            TermKind::Linear(p) | TermKind::ExpDecay(p) => Some(p),
        }
    }

    fn n_params(&self) -> usize {
        match self {
            TermKind::ExpDecay(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermKind::Constant => f.write_str("const"),
            TermKind::Linear(p) => f.write_str(p),
            TermKind::ExpDecay(p) => write!(f, "expdecay({p})"),
        }
    }
}

/// Term list of a structural equation without parameter values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    pub terms: Vec<TermKind>,
}

impl Template {
    pub fn new(terms: Vec<TermKind>) -> Self {
        Template { terms }
    }

    /// The template of an additive law.
    pub fn of_law<T: Scalar>(law: &Law<T>) -> Result<Self> {
        let Law::Additive { terms, .. } = law else {
            return Err(Error::InvalidSem("only additive equations have a fitting template".into()));
        };
        Ok(Template {
            terms: terms
                .iter()
                .map(|t| match t {
                    Term::Constant(_) => TermKind::Constant,
                    Term::Linear { parent, .. } => TermKind::Linear(parent.clone()),
                    Term::ExpDecay { parent, .. } => TermKind::ExpDecay(parent.clone()),
                })
                .collect(),
        })
    }

    /// Parses `const + T + C + expdecay(A)`.
    pub fn parse(text: &str) -> Result<Self> {
        let err = |m: String| Error::Parse { line: 1, message: m };
        let terms = text
            .split('+')
            .map(str::trim)
            .map(|t| {
                if t == "const" {
                    Ok(TermKind::Constant)
                } else if let Some(p) = t.strip_prefix("expdecay(").and_then(|r| r.strip_suffix(')')) {
                    Ok(TermKind::ExpDecay(p.trim().to_string()))
                } else if t.is_empty() || t.contains(char::is_whitespace) {
                    Err(err(format!("bad template term `{t}`")))
                } else {
                    Ok(TermKind::Linear(t.to_string()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Template { terms })
    }

    pub fn parents(&self) -> BTreeSet<String> {
        self.terms.iter().filter_map(TermKind::parent).map(str::to_string).collect()
    }

    pub fn n_params(&self) -> usize {
        self.terms.iter().map(TermKind::n_params).sum()
    }

    pub fn is_linear(&self) -> bool {
        !self.terms.iter().any(|t| matches!(t, TermKind::ExpDecay(_)))
    }

    /// Terms with parameters taken in order from `params`
    /// (`[b]` per constant or linear term, `[scale, rate]` per decay term).
    pub fn with_params<T: Scalar>(&self, params: &[T]) -> Result<Vec<Term<T>>> {
        if params.len() != self.n_params() {
            return Err(Error::LengthMismatch { left: self.n_params(), right: params.len() });
        }
        let mut it = params.iter().copied();
        let mut next = || it.next().expect("length checked");
        Ok(self
            .terms
            .iter()
            .map(|k| match k {
                TermKind::Constant => Term::Constant(next()),
                TermKind::Linear(p) => Term::Linear { parent: p.clone(), coefficient: next() },
                TermKind::ExpDecay(p) => {
                    let scale = next();
                    Term::ExpDecay { parent: p.clone(), scale, rate: next() }
                }
            })
            .collect())
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" + "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics<T> {
    pub converged: bool,
    pub iterations: usize,
    pub rss: T,
}

/// Estimated structural equation of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedSem<T> {
    pub target: String,
    pub terms: Vec<Term<T>>,
    /// Maximum-likelihood Gaussian noise scale (root mean squared residual).
    pub sigma: T,
    pub diagnostics: FitDiagnostics<T>,
}

impl<T: Scalar> FittedSem<T> {
    /// Treats a known equation as a fit, e.g. to apply the true parameters.
    pub fn from_law(target: &str, law: &Law<T>) -> Result<Self> {
        let Law::Additive { terms, noise } = law else {
            return Err(Error::InvalidSem(format!("{target}: only additive equations can be applied")));
        };
        let sigma = match noise {
            Noise::Gaussian(s) => *s,
            Noise::None => T::zero(),
        };
        Ok(FittedSem {
            target: target.to_string(),
            terms: terms.clone(),
            sigma,
            diagnostics: FitDiagnostics { converged: true, iterations: 0, rss: T::zero() },
        })
    }

    pub fn template(&self) -> Template {
        Template::of_law(&Law::Additive { terms: self.terms.clone(), noise: Noise::None }).expect("additive")
    }

    /// Parameters in template order.
    pub fn params(&self) -> Vec<T> {
        self.terms
            .iter()
            .flat_map(|t| match *t {
                Term::Constant(c) => vec![c],
                Term::Linear { coefficient, .. } => vec![coefficient],
                Term::ExpDecay { scale, rate, .. } => vec![scale, rate],
            })
            .collect()
    }

    /// Summed fitted contribution of every term with parent `parent`.
    pub fn contribution(&self, parent: &str, data: &Dataset<T>) -> Result<Vec<T>> {
        let x = data.column(parent)?;
        let mut out = vec![T::zero(); x.len()];
        for t in self.terms.iter().filter(|t| t.parent() == Some(parent)) {
            out.iter_mut().zip(x).for_each(|(o, &v)| *o += t.eval(v));
        }
        Ok(out)
    }

    /// Fitted mean of the target on every row.
    pub fn predict(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); data.n_rows()];
        for t in &self.terms {
            match t.parent() {
                Some(p) => out.iter_mut().zip(data.column(p)?).for_each(|(o, &v)| *o += t.eval(v)),
                None => out.iter_mut().for_each(|o| *o += t.eval(T::zero())),
            }
        }
        Ok(out)
    }
}

impl<T: Scalar> fmt::Display for FittedSem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let law = Law::Additive { terms: self.terms.clone(), noise: Noise::Gaussian(self.sigma) };
        write!(
            f,
            "{} = {} (converged: {}, iterations: {}, rss: {})",
            self.target, law, self.diagnostics.converged, self.diagnostics.iterations, self.diagnostics.rss
        )
    }
}

/// Residuals `y - f(x; params)` and their Jacobian with respect to `params`
/// (one column per parameter, in template order).
pub fn residual_jacobian<T: Scalar>(
    template: &Template,
    params: &[T],
    data: &Dataset<T>,
    target: &str,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let terms = template.with_params(params)?;
    let y = data.column(target)?;
    let mut r = y.to_vec();
    let mut jac = Vec::with_capacity(params.len());
    for t in &terms {
        let x: Vec<T> = match t.parent() {
            Some(p) => data.column(p)?.to_vec(),
            None => vec![T::zero(); y.len()],
        };
        r.iter_mut().zip(&x).for_each(|(ri, &xi)| *ri -= t.eval(xi));
        match *t {
            Term::Constant(_) => jac.push(vec![-T::one(); y.len()]),
            Term::Linear { .. } => jac.push(x.iter().map(|&v| -v).collect()),
            Term::ExpDecay { scale, rate, .. } => {
                let e: Vec<T> = x.iter().map(|&v| (-rate * v).exp()).collect();
                jac.push(e.iter().map(|&ei| -ei).collect());
                jac.push(x.iter().zip(&e).map(|(&v, &ei)| scale * v * ei).collect());
            }
        }
    }
    Ok((r, jac))
}

/// Fits an additive equation for `target` by least squares (Gaussian maximum
/// likelihood).
///
/// Purely linear templates are solved in closed form. Templates with decay terms
/// are solved by Gauss–Newton on the decay rates with the linear parameters
/// (including decay scales) projected out exactly at every step; each fit is
/// restarted from rates `{0.01, 0.03, 0.1, 0.3, 1}` and the lowest residual kept.
pub fn fit_additive_sem<T: Scalar>(data: &Dataset<T>, template: &Template, target: &str) -> Result<FittedSem<T>> {
    let y = data.column(target)?;
    for p in template.parents() {
        data.column(&p)?;
    }
    if y.len() <= template.n_params() {
        return Err(Error::InvalidInput(format!(
            "{} rows cannot determine {} parameters",
            y.len(),
            template.n_params()
        )));
    }
    let decays = template.terms.iter().filter(|t| matches!(t, TermKind::ExpDecay(_))).count();
    let best = if decays == 0 {
        let p = Projection::solve(template, data, y, &[])?;
        Outcome { rates: Vec::new(), projection: p, converged: true, iterations: 0 }
    } else {
        let mut best: Option<Outcome<T>> = None;
        let mut failure = None;
        for start in [0.01, 0.03, 0.1, 0.3, 1.0] {
            let run = match gauss_newton(template, data, y, vec![T::of(start); decays]) {
                Ok(run) => run,
                Err(e) => {
                    failure = Some(e);
                    continue;
                }
            };
            let better =
                best.as_ref().is_none_or(|b| (run.converged, -run.projection.rss) > (b.converged, -b.projection.rss));
            if better {
                best = Some(run);
            }
        }
        match (best, failure) {
            (Some(b), _) => b,
            (None, Some(e)) => return Err(e),
            (None, None) => unreachable!("at least one start runs"),
        }
    };
    let params = interleave(template, &best.projection.coefficients, &best.rates);
    let rss = best.projection.rss;
    Ok(FittedSem {
        target: target.to_string(),
        terms: template.with_params(&params)?,
        sigma: (rss / T::of_usize(y.len())).sqrt(),
        diagnostics: FitDiagnostics { converged: best.converged, iterations: best.iterations, rss },
    })
}

struct Outcome<T> {
    rates: Vec<T>,
    projection: Projection<T>,
    converged: bool,
    iterations: usize,
}

/// Linear parameters solved exactly for fixed decay rates.
struct Projection<T> {
    design: Vec<Vec<T>>,
    coefficients: Vec<T>,
    residuals: Vec<T>,
    rss: T,
}

impl<T: Scalar> Projection<T> {
    fn solve(template: &Template, data: &Dataset<T>, y: &[T], rates: &[T]) -> Result<Self> {
        let mut rates = rates.iter();
        let mut names = Vec::new();
        let mut design = Vec::new();
        for k in &template.terms {
            names.push(k.to_string());
            design.push(match k {
                TermKind::Constant => vec![T::one(); y.len()],
                TermKind::Linear(p) => data.column(p)?.to_vec(),
                TermKind::ExpDecay(p) => {
                    let rate = *rates.next().expect("one rate per decay term");
                    data.column(p)?.iter().map(|&v| (-rate * v).exp()).collect()
                }
            });
        }
        let cols: Vec<&[T]> = design.iter().map(Vec::as_slice).collect();
        let coefficients = least_squares(&cols, y).map_err(|c| Error::RankDeficient {
            columns: c.depends_on.iter().chain(std::iter::once(&c.column)).map(|&i| names[i].clone()).collect(),
        })?;
        let residuals: Vec<T> =
            (0..y.len()).map(|i| y[i] - design.iter().zip(&coefficients).map(|(c, &b)| c[i] * b).sum::<T>()).collect();
        let rss = residuals.iter().map(|&r| r * r).sum();
        Ok(Projection { design, coefficients, residuals, rss })
    }
}

/// Full parameter vector from linear coefficients (one per term) and decay rates.
fn interleave<T: Scalar>(template: &Template, coefficients: &[T], rates: &[T]) -> Vec<T> {
    let mut rates = rates.iter();
    let mut out = Vec::with_capacity(template.n_params());
    for (k, &c) in template.terms.iter().zip(coefficients) {
        out.push(c);
        if matches!(k, TermKind::ExpDecay(_)) {
            out.push(*rates.next().expect("one rate per decay term"));
        }
    }
    out
}

const MAX_ITERATIONS: usize = 500;
const MAX_HALVINGS: usize = 40;

fn gauss_newton<T: Scalar>(template: &Template, data: &Dataset<T>, y: &[T], mut rates: Vec<T>) -> Result<Outcome<T>> {
    let step_tol = T::of(1e-10);
    let mut current = Projection::solve(template, data, y, &rates)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        // Kaufman's approximation: derivative of the residual with respect to each
        // rate at fixed linear coefficients, projected off the design columns.
        let mut jac = Vec::new();
        let mut d = 0;
        for (k, term) in template.terms.iter().enumerate() {
            let TermKind::ExpDecay(p) = term else { continue };
            let scale = current.coefficients[k];
            let x = data.column(p)?;
            let g: Vec<T> = x.iter().map(|&v| scale * v * (-rates[d] * v).exp()).collect();
            jac.push(project_out(&current.design, &g));
            d += 1;
        }
        let cols: Vec<&[T]> = jac.iter().map(Vec::as_slice).collect();
        let neg_r: Vec<T> = current.residuals.iter().map(|&r| -r).collect();
        let Ok(step) = least_squares(&cols, &neg_r) else {
            break;
        };
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<T> = rates.iter().zip(&step).map(|(&r, &s)| r + t * s).collect();
            if let Ok(p) = Projection::solve(template, data, y, &trial) {
                if p.rss < current.rss {
                    accepted = Some((trial, p));
                    break;
                }
            }
            t *= T::of(0.5);
        }
        let Some((trial, next)) = accepted else {
            // No decrease along the Gauss–Newton direction: the residual is at a
            // minimum up to rounding when the predicted reduction is negligible.
            let predicted: T = jac
                .iter()
                .zip(&step)
                .fold(current.residuals.clone(), |mut acc, (col, &s)| {
                    acc.iter_mut().zip(col).for_each(|(a, &c)| *a += c * s);
                    acc
                })
                .iter()
                .map(|&v| v * v)
                .sum();
            converged = current.rss - predicted <= T::epsilon().sqrt() * current.rss;
            break;
        };
        let mut change = T::zero();
        for (a, b) in trial.iter().zip(&rates) {
            change = change.max((*a - *b).abs());
        }
        for (a, b) in next.coefficients.iter().zip(&current.coefficients) {
            change = change.max((*a - *b).abs());
        }
        rates = trial;
        current = next;
        if change < step_tol {
            converged = true;
            break;
        }
    }
    Ok(Outcome { rates, projection: current, converged, iterations })
}

/// `g` minus its least-squares projection onto the span of `design`.
fn project_out<T: Scalar>(design: &[Vec<T>], g: &[T]) -> Vec<T> {
    let cols: Vec<&[T]> = design.iter().map(Vec::as_slice).collect();
    match least_squares(&cols, g) {
        Ok(b) => (0..g.len()).map(|i| g[i] - design.iter().zip(&b).map(|(c, &bj)| c[i] * bj).sum::<T>()).collect(),
        Err(_) => g.to_vec(),
    }
}

/// Bootstrap standard error of every parameter (template order) from `replicates`
/// row resamples. Resamples whose fit fails are skipped.
pub fn bootstrap_standard_errors<T: Scalar>(
    data: &Dataset<T>,
    template: &Template,
    target: &str,
    replicates: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let n = data.n_rows();
    let fits: Vec<Vec<T>> = (0..replicates)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = stream(seed, &format!("bootstrap/{b}"));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            fit_additive_sem(&data.rows(&idx), template, target).ok().map(|f| f.params())
        })
        .collect();
    if fits.len() < 2 {
        return Err(Error::InvalidInput("fewer than two bootstrap fits succeeded".into()));
    }
    Ok((0..template.n_params())
        .map(|j| {
            let col: Vec<T> = fits.iter().map(|f| f[j]).collect();
            crate::scalar::sample_variance(&col).sqrt()
        })
        .collect())
}

/// `target - sum of fitted contributions of the intervened parents`, row by row.
///
/// Only the target and the intervened parents are read, so the estimate never
/// needs the value of any other parent (in particular the prediction target).
pub fn estimate_counterfactual<T: Scalar>(
    fit: &FittedSem<T>,
    data: &Dataset<T>,
    intervened: &BTreeSet<String>,
) -> Result<Vec<T>> {
    let parents: BTreeSet<&str> = fit.terms.iter().filter_map(Term::parent).collect();
    if let Some(p) = intervened.iter().find(|p| !parents.contains(p.as_str())) {
        return Err(Error::InvalidInput(format!("`{p}` has no term in the equation for `{}`", fit.target)));
    }
    let mut out = data.column(&fit.target)?.to_vec();
    for p in intervened {
        let c = fit.contribution(p, data)?;
        out.iter_mut().zip(c).for_each(|(o, c)| *o -= c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(cols: &[(&str, Vec<f64>)]) -> Dataset<f64> {
        Dataset::from_columns(cols.iter().map(|(n, c)| (n.to_string(), c.clone()))).unwrap()
    }

    #[test]
    fn noiseless_linear_equation_is_recovered() {
        let t = vec![0.0, 1.0, 0.0, 1.0, 1.0];
        let c = vec![1.0, 0.0, 0.0, 1.0, 2.0];
        let y: Vec<f64> = t.iter().zip(&c).map(|(t, c)| 2.0 * t + 3.0 * c).collect();
        let d = data(&[("T", t), ("C", c), ("Y", y)]);
        let fit = fit_additive_sem(&d, &Template::parse("T + C").unwrap(), "Y").unwrap();
        let p = fit.params();
        assert!((p[0] - 2.0).abs() < 1e-8 && (p[1] - 3.0).abs() < 1e-8, "{p:?}");
        assert!(fit.diagnostics.converged);
    }

    #[test]
    fn collinear_parents_are_named() {
        let t = vec![0.0, 1.0, 2.0, 3.0];
        let c: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
        let d = data(&[("T", t.clone()), ("C", c), ("Y", t)]);
        let err = fit_additive_sem(&d, &Template::parse("const + T + C").unwrap(), "Y").unwrap_err();
        match err {
            Error::RankDeficient { columns } => assert!(columns.contains(&"C".to_string())),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn noiseless_decay_curve_is_recovered() {
        let a: Vec<f64> = (0..60).map(|i| f64::from(i) * 0.4).collect();
        let y: Vec<f64> = a.iter().map(|&v| 1.0 + 2.0 * (-0.08 * v).exp()).collect();
        let d = data(&[("A", a), ("Y", y)]);
        let fit = fit_additive_sem(&d, &Template::parse("const + expdecay(A)").unwrap(), "Y").unwrap();
        let p = fit.params();
        assert!(fit.diagnostics.converged);
        for (got, want) in p.iter().zip([1.0, 2.0, 0.08]) {
            assert!((got - want).abs() < 1e-7, "{p:?}");
        }
    }

    #[test]
    fn counterfactual_subtracts_intervened_terms() {
        let fit = FittedSem::<f64> {
            target: "Y".into(),
            terms: vec![Term::Linear { parent: "C".into(), coefficient: 3.0 }],
            sigma: 0.0,
            diagnostics: FitDiagnostics { converged: true, iterations: 0, rss: 0.0 },
        };
        let d = data(&[("Y", vec![5.0]), ("C", vec![1.0])]);
        let c = BTreeSet::from(["C".to_string()]);
        assert_eq!(estimate_counterfactual(&fit, &d, &c).unwrap(), [2.0]);
        assert_eq!(estimate_counterfactual(&fit, &d, &BTreeSet::new()).unwrap(), [5.0]);
        let x = BTreeSet::from(["X".to_string()]);
        assert!(matches!(estimate_counterfactual(&fit, &d, &x), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn template_text_round_trips() {
        let t = Template::parse("const + T + C + expdecay(A)").unwrap();
        assert_eq!(t.to_string(), "const + T + C + expdecay(A)");
        assert_eq!(t.n_params(), 5);
        assert!(!t.is_linear());
    }
}
