use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::graph::{CausalDag, NodeKind};
use crate::scalar::Scalar;
use crate::stability::CounterfactualNode;

/// One additive term of a structural equation.
#[derive(Debug, Clone, PartialEq)]
pub enum Term<T> {
    Constant(T),
    Linear {
        parent: String,
        coefficient: T,
    },
    /// `scale * exp(-rate * parent)`.
    ExpDecay {
        parent: String,
        scale: T,
        rate: T,
    },
}

impl<T: Scalar> Term<T> {
    pub fn parent(&self) -> Option<&str> {
        match self {
            Term::Constant(_) => None,
            Term::Linear { parent, .. } | Term::ExpDecay { parent, .. } => Some(parent),
        }
    }

    /// Value of the term when its parent takes the value `x` (ignored for constants).
    pub fn eval(&self, x: T) -> T {
        match *self {
            Term::Constant(c) => c,
            Term::Linear { coefficient, .. } => coefficient * x,
            Term::ExpDecay { scale, rate, .. } => scale * (-rate * x).exp(),
        }
    }
}

impl<T: Scalar> fmt::Display for Term<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(c) => write!(f, "{c}"),
            Term::Linear { parent, coefficient } => write!(f, "{coefficient}*{parent}"),
            Term::ExpDecay { parent, scale, rate } => write!(f, "expdecay({parent}, {scale}, {rate})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise<T> {
    None,
    Gaussian(T),
}

/// `scale * Beta(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledBeta<T> {
    pub scale: T,
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> fmt::Display for ScaledBeta<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.scale, self.alpha, self.beta)
    }
}

/// Switches a scaled-Beta law on the value of one parent.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSwitch<T> {
    pub parent: String,
    pub level: T,
    pub otherwise: ScaledBeta<T>,
}

/// Distribution of one node given its parents.
#[derive(Debug, Clone, PartialEq)]
pub enum Law<T> {
    /// Sum of terms plus noise.
    Additive {
        terms: Vec<Term<T>>,
        noise: Noise<T>,
    },
    Bernoulli {
        p: T,
    },
    /// `P(node = 1)` looked up by the exact value of `parent`.
    BernoulliTable {
        parent: String,
        table: Vec<(T, T)>,
    },
    /// `law` when `switch` is absent or its parent equals its level, else `switch.otherwise`.
    ScaledBeta {
        law: ScaledBeta<T>,
        switch: Option<BetaSwitch<T>>,
    },
}

impl<T: Scalar> Law<T> {
    pub fn parents(&self) -> BTreeSet<String> {
        match self {
            Law::Additive { terms, .. } => terms.iter().filter_map(Term::parent).map(str::to_string).collect(),
            Law::Bernoulli { .. } => BTreeSet::new(),
            Law::BernoulliTable { parent, .. } => BTreeSet::from([parent.clone()]),
            Law::ScaledBeta { switch, .. } => switch.iter().map(|s| s.parent.clone()).collect(),
        }
    }

    fn check(&self, node: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSem(format!("{node}: {msg}")));
        let prob = |p: T| p >= T::zero() && p <= T::one();
        let beta_ok = |b: &ScaledBeta<T>| b.alpha > T::zero() && b.beta > T::zero() && b.scale.is_finite();
        match self {
            Law::Additive { terms, noise } => {
                if let Noise::Gaussian(s) = noise {
                    if !(*s > T::zero() && s.is_finite()) {
                        return bad(format!("noise scale must be positive, got {s}"));
                    }
                }
                let finite = terms.iter().all(|t| match *t {
                    Term::Constant(c) => c.is_finite(),
                    Term::Linear { coefficient, .. } => coefficient.is_finite(),
                    Term::ExpDecay { scale, rate, .. } => scale.is_finite() && rate.is_finite(),
                });
                if !finite {
                    return bad("non-finite term parameter".into());
                }
            }
            Law::Bernoulli { p } => {
                if !prob(*p) {
                    return bad(format!("probability {p} outside [0, 1]"));
                }
            }
            Law::BernoulliTable { table, .. } => {
                if table.is_empty() {
                    return bad("empty probability table".into());
                }
                if let Some((_, p)) = table.iter().find(|(_, p)| !prob(*p)) {
                    return bad(format!("probability {p} outside [0, 1]"));
                }
            }
            Law::ScaledBeta { law, switch } => {
                let other = switch.as_ref().map(|s| s.otherwise);
                if !beta_ok(law) || !other.iter().all(beta_ok) {
                    return bad("Beta shape parameters must be positive".into());
                }
            }
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for Law<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Law::Additive { terms, noise } => {
                let mut parts: Vec<String> = terms.iter().map(ToString::to_string).collect();
                match noise {
                    Noise::Gaussian(s) => parts.push(format!("noise gaussian {s}")),
                    Noise::None if terms.is_empty() => parts.push("noise none".into()),
                    Noise::None => {}
                }
                f.write_str(&parts.join(" + "))
            }
            Law::Bernoulli { p } => write!(f, "bernoulli {p}"),
            Law::BernoulliTable { parent, table } => {
                write!(f, "bernoulli_table {parent}")?;
                for (level, p) in table {
                    write!(f, " {level}:{p}")?;
                }
                Ok(())
            }
            Law::ScaledBeta { law, switch: None } => write!(f, "scaled_beta {law}"),
            Law::ScaledBeta { law, switch: Some(s) } => {
                write!(f, "scaled_beta {law} if {}={} else {}", s.parent, s.level, s.otherwise)
            }
        }
    }
}

/// Structural equations keyed by node name, in declaration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemSpec<T> {
    pub equations: IndexMap<String, Law<T>>,
}

impl<T: Scalar> SemSpec<T> {
    pub fn new() -> Self {
        SemSpec { equations: IndexMap::new() }
    }

    pub fn with(mut self, node: &str, law: Law<T>) -> Self {
        self.equations.insert(node.to_string(), law);
        self
    }

    pub fn law(&self, node: &str) -> Result<&Law<T>> {
        self.equations.get(node).ok_or_else(|| Error::MissingEquation(node.to_string()))
    }

    /// Checks that the equations match the graph: one per non-selection node (the
    /// selection node may be omitted), term parents equal to graph parents, and
    /// parameters in range.
    pub fn validate(&self, graph: &CausalDag) -> Result<()> {
        for node in self.equations.keys() {
            if !graph.contains(node) {
                return Err(Error::UnknownNode(node.clone()));
            }
        }
        for (node, kind) in graph.nodes() {
            let Some(law) = self.equations.get(node) else {
                if kind == NodeKind::Selection {
                    continue;
                }
                return Err(Error::MissingEquation(node.to_string()));
            };
            law.check(node)?;
            let declared = law.parents();
            let actual: BTreeSet<String> = graph.parents(node)?.into_iter().map(str::to_string).collect();
            if let Some(p) = declared.difference(&actual).next() {
                return Err(Error::InvalidSem(format!("{node}: `{p}` is not a graph parent")));
            }
            if let Some(p) = actual.difference(&declared).next() {
                return Err(Error::InvalidSem(format!("{node}: graph parent `{p}` has no term")));
            }
        }
        Ok(())
    }

    /// Equations of the node-split model: the counterfactual takes every term of
    /// the base equation outside the intervened parents, plus its noise; the
    /// factual node becomes the counterfactual plus the intervened terms, noiseless.
    pub fn split(&self, cf: &CounterfactualNode) -> Result<SemSpec<T>> {
        let Law::Additive { terms, noise } = self.law(&cf.base)? else {
            return Err(Error::InvalidSem(format!("{}: only additive equations split", cf.base)));
        };
        let (cut, kept): (Vec<_>, Vec<_>) =
            terms.iter().cloned().partition(|t| t.parent().is_some_and(|p| cf.intervened.contains(p)));
        let mut equations = IndexMap::new();
        for (node, law) in &self.equations {
            if *node == cf.base {
                equations.insert(cf.name(), Law::Additive { terms: kept.clone(), noise: *noise });
                let mut factual = cut.clone();
                factual.push(Term::Linear { parent: cf.name(), coefficient: T::one() });
                equations.insert(node.clone(), Law::Additive { terms: factual, noise: Noise::None });
            } else {
                equations.insert(node.clone(), law.clone());
            }
        }
        Ok(SemSpec { equations })
    }
}

impl<T: Scalar> fmt::Display for SemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (node, law) in &self.equations {
            writeln!(f, "eq {node} = {law}")?;
        }
        Ok(())
    }
}

/// Parses `eq <node> = <law>` lines; `#` starts a comment.
pub fn parse_sem<T: Scalar>(text: &str) -> Result<SemSpec<T>> {
    let mut spec = SemSpec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let rest = line.strip_prefix("eq ").ok_or_else(|| err(format!("expected `eq <node> = ...`, got `{line}`")))?;
        let (node, body) = split_definition(rest).ok_or_else(|| err("missing `=` after node name".into()))?;
        let node = node.trim();
        if node.is_empty() || node.contains(char::is_whitespace) {
            return Err(err(format!("bad node name `{node}`")));
        }
        let law = parse_law(body.trim()).map_err(err)?;
        if spec.equations.insert(node.to_string(), law).is_some() {
            return Err(err(format!("duplicate equation for `{node}`")));
        }
    }
    Ok(spec)
}

/// Splits `name = body` at the first `=` outside parentheses, so counterfactual
/// names such as `Y(C=∅)` stay whole.
fn split_definition(s: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '=' if depth == 0 => return Some((&s[..i], &s[i + 1..])),
            _ => {}
        }
    }
    None
}

fn num<T: Scalar>(s: &str) -> std::result::Result<T, String> {
    s.trim().parse::<T>().map_err(|_| format!("expected a number, got `{}`", s.trim()))
}

fn parse_law<T: Scalar>(body: &str) -> std::result::Result<Law<T>, String> {
    let words: Vec<&str> = body.split_whitespace().collect();
    match words.first().copied() {
        Some("bernoulli") => match words.as_slice() {
            [_, p] => Ok(Law::Bernoulli { p: num(p)? }),
            _ => Err("expected `bernoulli <p>`".into()),
        },
        Some("bernoulli_table") => {
            let [_, parent, entries @ ..] = words.as_slice() else {
                return Err("expected `bernoulli_table <parent> <level>:<p> ...`".into());
            };
            let table = entries
                .iter()
                .map(|e| {
                    let (l, p) = e.split_once(':').ok_or(format!("bad table entry `{e}`"))?;
                    Ok((num(l)?, num(p)?))
                })
                .collect::<std::result::Result<Vec<_>, String>>()?;
            Ok(Law::BernoulliTable { parent: parent.to_string(), table })
        }
        Some("scaled_beta") => {
            let beta = |w: &[&str]| -> std::result::Result<ScaledBeta<T>, String> {
                match w {
                    [s, a, b] => Ok(ScaledBeta { scale: num(s)?, alpha: num(a)?, beta: num(b)? }),
                    _ => Err("expected `<scale> <alpha> <beta>`".into()),
                }
            };
            match &words[1..] {
                [s, a, b] => Ok(Law::ScaledBeta { law: beta(&[s, a, b])?, switch: None }),
                [s, a, b, "if", cond, "else", o @ ..] => {
                    let (parent, level) = cond.split_once('=').ok_or(format!("bad condition `{cond}`"))?;
                    Ok(Law::ScaledBeta {
                        law: beta(&[s, a, b])?,
                        switch: Some(BetaSwitch {
                            parent: parent.to_string(),
                            level: num(level)?,
                            otherwise: beta(o)?,
                        }),
                    })
                }
                _ => Err("expected `scaled_beta <scale> <alpha> <beta> [if P=v else ...]`".into()),
            }
        }
        _ => parse_additive(body),
    }
}

/// Splits on top-level `+`, leaving exponents such as `1e+3` intact.
fn split_terms(body: &str) -> Vec<&str> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'+' if depth == 0 => {
                let exponent = i >= 2 && matches!(bytes[i - 1], b'e' | b'E') && bytes[i - 2].is_ascii_digit();
                if !exponent {
                    out.push(&body[start..i]);
                    start = i + 1;
                }
            }
            _ => {}
        }
    }
    out.push(&body[start..]);
    out
}

fn parse_additive<T: Scalar>(body: &str) -> std::result::Result<Law<T>, String> {
    let mut terms = Vec::new();
    let mut noise = None;
    for raw in split_terms(body) {
        let t = raw.trim();
        if t.is_empty() {
            return Err("empty term".into());
        }
        if let Some(n) = t.strip_prefix("noise") {
            if noise.is_some() {
                return Err("more than one noise term".into());
            }
            let w: Vec<&str> = n.split_whitespace().collect();
            noise = Some(match w.as_slice() {
                ["none"] => Noise::None,
                ["gaussian", s] => Noise::Gaussian(num(s)?),
                _ => return Err(format!("bad noise term `{t}`")),
            });
        } else if let Some(args) = t.strip_prefix("expdecay(").and_then(|a| a.strip_suffix(')')) {
            let a: Vec<&str> = args.split(',').map(str::trim).collect();
            let [parent, scale, rate] = a.as_slice() else {
                return Err(format!("expected `expdecay(<parent>, <scale>, <rate>)`, got `{t}`"));
            };
            terms.push(Term::ExpDecay { parent: parent.to_string(), scale: num(scale)?, rate: num(rate)? });
        } else if let Some((c, parent)) = t.split_once('*') {
            terms.push(Term::Linear { parent: ident(parent)?, coefficient: num(c)? });
        } else if let Ok(c) = t.parse::<T>() {
            terms.push(Term::Constant(c));
        } else if let Some(parent) = t.strip_prefix('-') {
            terms.push(Term::Linear { parent: ident(parent)?, coefficient: -T::one() });
        } else {
            terms.push(Term::Linear { parent: ident(t)?, coefficient: T::one() });
        }
    }
    Ok(Law::Additive { terms, noise: noise.unwrap_or(Noise::None) })
}

fn ident(s: &str) -> std::result::Result<String, String> {
    let s = s.trim();
    if s.is_empty() || s.contains(|c: char| c.is_whitespace() || "*+".contains(c)) {
        Err(format!("bad variable name `{s}`"))
    } else {
        Ok(s.to_string())
    }
}
