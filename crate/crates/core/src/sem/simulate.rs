use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::dataset::Dataset;
use super::spec::{Law, Noise, ScaledBeta, SemSpec};
use crate::error::{Error, Result};
use crate::graph::{CausalDag, NodeKind};
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::stability::CounterfactualNode;

/// Forward-samples `n` rows in topological order.
///
/// Each node draws from its own stream keyed by `(seed, node)`, so adding or
/// removing a node never changes another node's draws. Unobserved nodes are
/// simulated and marked hidden. A selection node without an equation is skipped;
/// with one, rows where it equals 1 form the selection mask.
pub fn simulate<T: Scalar>(spec: &SemSpec<T>, graph: &CausalDag, n: usize, seed: u64) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    spec.validate(graph)?;
    let mut data = Dataset::new();
    data.set_seed(seed);
    for node in graph.topological_order()? {
        let Some(law) = spec.equations.get(&node) else {
            continue;
        };
        let mut rng = stream(seed, &node);
        let (col, noise) = sample_law(law, &data, &node, n, &mut rng)?;
        if let Some(draws) = noise {
            data.insert_noise(&node, draws);
        }
        match graph.kind(&node)? {
            NodeKind::Unobserved => data.hide(&node),
            NodeKind::Selection => {
                data.hide(&node);
                data.set_selection_mask(col.iter().map(|v| *v == T::one()).collect())?;
            }
            _ => {}
        }
        data.insert(node.as_str(), col)?;
    }
    Ok(data)
}

fn bernoulli<T: Scalar>(p: T, rng: &mut impl Rng) -> T {
    if rng.random::<f64>() < p.as_f64() {
        T::one()
    } else {
        T::zero()
    }
}

type Column<T> = Vec<T>;

/// Samples one node; additive laws also return their noise draws.
fn sample_law<T: Scalar>(
    law: &Law<T>,
    data: &Dataset<T>,
    node: &str,
    n: usize,
    rng: &mut impl Rng,
) -> Result<(Column<T>, Option<Column<T>>)> {
    match law {
        Law::Additive { terms, noise } => {
            let mut values = vec![T::zero(); n];
            for t in terms {
                match t.parent() {
                    Some(p) => {
                        for (v, &x) in values.iter_mut().zip(data.column(p)?) {
                            *v += t.eval(x);
                        }
                    }
                    None => values.iter_mut().for_each(|v| *v += t.eval(T::zero())),
                }
            }
            let Noise::Gaussian(sigma) = *noise else {
                return Ok((values, None));
            };
            let draws: Vec<T> = (0..n).map(|_| sigma * T::of(StandardNormal.sample(rng))).collect();
            for (v, e) in values.iter_mut().zip(&draws) {
                *v += *e;
            }
            Ok((values, Some(draws)))
        }
        Law::Bernoulli { p } => Ok(((0..n).map(|_| bernoulli(*p, rng)).collect(), None)),
        Law::BernoulliTable { parent, table } => {
            let col = data
                .column(parent)?
                .iter()
                .map(|&x| {
                    let (_, p) = table
                        .iter()
                        .find(|(level, _)| *level == x)
                        .ok_or_else(|| Error::InvalidSem(format!("{node}: no probability for {parent}={x}")))?;
                    Ok(bernoulli(*p, rng))
                })
                .collect::<Result<Vec<T>>>()?;
            Ok((col, None))
        }
        Law::ScaledBeta { law, switch } => {
            let dist = |b: &ScaledBeta<T>| {
                Beta::new(b.alpha.as_f64(), b.beta.as_f64())
                    .map(|d| (b.scale, d))
                    .map_err(|e| Error::InvalidSem(format!("{node}: {e}")))
            };
            let first = dist(law)?;
            let col = match switch {
                None => (0..n).map(|_| first.0 * T::of(first.1.sample(rng))).collect(),
                Some(s) => {
                    let other = dist(&s.otherwise)?;
                    data.column(&s.parent)?
                        .iter()
                        .map(|&x| {
                            let (scale, d) = if x == s.level { &first } else { &other };
                            *scale * T::of(d.sample(rng))
                        })
                        .collect()
                }
            };
            Ok((col, None))
        }
    }
}

/// The exact value of `cf` on every simulated row: the terms of the base equation
/// outside the intervened parents, evaluated on the data, plus the base node's
/// recorded noise.
pub fn true_counterfactual<T: Scalar>(spec: &SemSpec<T>, data: &Dataset<T>, cf: &CounterfactualNode) -> Result<Vec<T>> {
    let split = spec.split(cf)?;
    let Law::Additive { terms, noise } = split.law(&cf.name())? else {
        unreachable!("splitting yields an additive counterfactual equation");
    };
    let mut values = match noise {
        Noise::Gaussian(_) => data.noise(&cf.base)?.to_vec(),
        Noise::None => vec![T::zero(); data.n_rows()],
    };
    for t in terms {
        match t.parent() {
            Some(p) => values.iter_mut().zip(data.column(p)?).for_each(|(v, &x)| *v += t.eval(x)),
            None => values.iter_mut().for_each(|v| *v += t.eval(T::zero())),
        }
    }
    Ok(values)
}

/// Declarative row filter over named columns.
#[derive(Debug, Clone, PartialEq)]
pub enum RowPredicate<T> {
    Always,
    Never,
    Equals(String, T),
    Not(Box<RowPredicate<T>>),
    All(Vec<RowPredicate<T>>),
    Any(Vec<RowPredicate<T>>),
}

impl<T: Scalar> RowPredicate<T> {
    pub fn equals(column: &str, value: T) -> Self {
        RowPredicate::Equals(column.to_string(), value)
    }

    pub fn and(self, other: RowPredicate<T>) -> Self {
        match self {
            RowPredicate::All(mut xs) => {
                xs.push(other);
                RowPredicate::All(xs)
            }
            p => RowPredicate::All(vec![p, other]),
        }
    }

    pub fn columns(&self) -> BTreeSet<String> {
        match self {
            RowPredicate::Always | RowPredicate::Never => BTreeSet::new(),
            RowPredicate::Equals(c, _) => BTreeSet::from([c.clone()]),
            RowPredicate::Not(p) => p.columns(),
            RowPredicate::All(ps) | RowPredicate::Any(ps) => ps.iter().flat_map(|p| p.columns()).collect(),
        }
    }

    /// One flag per row of `data`.
    pub fn evaluate(&self, data: &Dataset<T>) -> Result<Vec<bool>> {
        let n = data.n_rows();
        Ok(match self {
            RowPredicate::Always => vec![true; n],
            RowPredicate::Never => vec![false; n],
            RowPredicate::Equals(c, v) => data.column(c)?.iter().map(|x| x == v).collect(),
            RowPredicate::Not(p) => p.evaluate(data)?.into_iter().map(|b| !b).collect(),
            RowPredicate::All(ps) => {
                let mut acc = vec![true; n];
                for p in ps {
                    acc.iter_mut().zip(p.evaluate(data)?).for_each(|(a, b)| *a &= b);
                }
                acc
            }
            RowPredicate::Any(ps) => {
                let mut acc = vec![false; n];
                for p in ps {
                    acc.iter_mut().zip(p.evaluate(data)?).for_each(|(a, b)| *a |= b);
                }
                acc
            }
        })
    }
}

impl<T: Scalar> fmt::Display for RowPredicate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join =
            |ps: &[RowPredicate<T>], sep: &str| ps.iter().map(|p| format!("({p})")).collect::<Vec<_>>().join(sep);
        match self {
            RowPredicate::Always => f.write_str("true"),
            RowPredicate::Never => f.write_str("false"),
            RowPredicate::Equals(c, v) => write!(f, "{c}={v}"),
            RowPredicate::Not(p) => write!(f, "not ({p})"),
            RowPredicate::All(ps) => f.write_str(&join(ps, " and ")),
            RowPredicate::Any(ps) => f.write_str(&join(ps, " or ")),
        }
    }
}

/// Selection mask of a rejection step: rows matching `predicate` are rejected
/// independently with probability `rejection_probability`. One uniform is drawn
/// per row whether or not it matches, so the mask is stable under edits to the
/// predicate for the other rows.
pub fn rejection_mask<T: Scalar>(
    data: &Dataset<T>,
    predicate: &RowPredicate<T>,
    rejection_probability: f64,
    seed: u64,
) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&rejection_probability) {
        return Err(Error::InvalidInput(format!("rejection probability {rejection_probability} outside [0, 1]")));
    }
    let matches = predicate.evaluate(data)?;
    let mut rng = stream(seed, "reject");
    Ok(matches
        .into_iter()
        .map(|m| {
            let u: f64 = rng.random();
            !(m && u < rejection_probability)
        })
        .collect())
}

/// Rows kept by [`rejection_mask`].
pub fn reject_sample<T: Scalar>(
    data: &Dataset<T>,
    predicate: &RowPredicate<T>,
    rejection_probability: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    let keep = rejection_mask(data, predicate, rejection_probability, seed)?;
    data.filter(&keep)
}

/// `data` with its selection mask set by [`rejection_mask`]; no rows are dropped.
pub fn mark_rejections<T: Scalar>(
    data: &Dataset<T>,
    predicate: &RowPredicate<T>,
    rejection_probability: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    let keep = rejection_mask(data, predicate, rejection_probability, seed)?;
    let mut out = data.clone();
    out.set_selection_mask(keep)?;
    Ok(out)
}
