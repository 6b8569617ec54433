use std::collections::BTreeSet;

use cfn_core::graph::{parse_dag, CausalDag};
use cfn_core::scalar::{mean, sample_variance};
use cfn_core::sem::{
    bootstrap_standard_errors, estimate_counterfactual, fit_additive_sem, parse_sem, reject_sample, residual_jacobian,
    simulate, Dataset, FittedSem, RowPredicate, SemSpec, Template,
};
use cfn_core::stability::{node_split, CounterfactualNode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCREENING_DAG: &str = "\
node D unobserved
node T target
node C observed
node Y observed
edge D T
edge D C
edge T Y
edge C Y
";

const HOSPITAL_DAG: &str = "\
node D unobserved
node T target
node C observed
node A observed
node Y observed
edge D T
edge D C
edge C A
edge C Y
edge A Y
edge T Y
";

const SOURCE_SEM: &str = "\
eq D = bernoulli 0.5
eq T = bernoulli_table D 1:0.7 0:0.1
eq C = bernoulli_table D 1:0.9 0:0.1
eq A = scaled_beta 24 0.5 2.1 if C=1 else 24 0.7 0.2
eq Y = -0.5*T + -0.3*C + expdecay(A, 2, 0.08) + noise gaussian 0.2
";

fn dag(text: &str) -> CausalDag {
    parse_dag(text).unwrap().build().unwrap()
}

fn linear_sem(w1: f64, w2: f64, w3: f64, w4: f64) -> SemSpec<f64> {
    parse_sem(&format!(
        "eq D = noise gaussian 0.1\n\
         eq T = {w1}*D + noise gaussian 0.1\n\
         eq C = {w2}*D + noise gaussian 0.1\n\
         eq Y = {w3}*T + {w4}*C + noise gaussian 0.1\n"
    ))
    .unwrap()
}

fn names(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn linear_outcome_residual_variance_matches_noise() {
    let g = dag(SCREENING_DAG);
    let d = simulate(&linear_sem(0.7, 2.0, -1.1, 0.4), &g, 30_000, 1).unwrap();
    let fit = fit_additive_sem(&d, &Template::parse("T + C").unwrap(), "Y").unwrap();
    let resid: Vec<f64> = d.column("Y").unwrap().iter().zip(fit.predict(&d).unwrap()).map(|(y, p)| y - p).collect();
    let v = sample_variance(&resid);
    assert!((v - 0.01).abs() < 0.0005, "{v}");
}

#[test]
fn linear_coefficients_lie_within_three_standard_errors() {
    let g = dag(SCREENING_DAG);
    let (w3, w4) = (-1.1, 0.4);
    let d = simulate(&linear_sem(0.7, 2.0, w3, w4), &g, 30_000, 2).unwrap();
    let fit = fit_additive_sem(&d, &Template::parse("T + C").unwrap(), "Y").unwrap();
    // Classical OLS standard errors from sigma^2 (X'X)^-1 for the two-column design.
    let (t, c) = (d.column("T").unwrap(), d.column("C").unwrap());
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (stt, scc, stc) = (dot(t, t), dot(c, c), dot(t, c));
    let det = stt * scc - stc * stc;
    let s2 = fit.diagnostics.rss / (d.n_rows() as f64 - 2.0);
    let se = [(s2 * scc / det).sqrt(), (s2 * stt / det).sqrt()];
    let p = fit.params();
    assert!((p[0] - w3).abs() < 3.0 * se[0], "{} vs {w3} (se {})", p[0], se[0]);
    assert!((p[1] - w4).abs() < 3.0 * se[1], "{} vs {w4} (se {})", p[1], se[1]);
}

#[test]
fn comorbidity_follows_its_conditional_law() {
    let d = simulate::<f64>(&parse_sem(SOURCE_SEM).unwrap(), &dag(HOSPITAL_DAG), 100_000, 3).unwrap();
    let (dd, c) = (d.column("D").unwrap(), d.column("C").unwrap());
    let sick: Vec<f64> = dd.iter().zip(c).filter(|(d, _)| **d == 1.0).map(|(_, c)| *c).collect();
    let p = mean(&sick);
    assert!((p - 0.9).abs() < 0.01, "{p}");
    assert!(d.is_hidden("D"));
}

#[test]
fn rejection_retains_the_expected_fraction() {
    let d = simulate::<f64>(&parse_sem(SOURCE_SEM).unwrap(), &dag(HOSPITAL_DAG), 100_000, 4).unwrap();
    let pred = RowPredicate::equals("C", 1.0).and(RowPredicate::equals("T", 0.0));
    let matching = pred.evaluate(&d).unwrap().iter().filter(|m| **m).count();
    let kept = reject_sample(&d, &pred, 0.9, 5).unwrap();
    let kept_matching = pred.evaluate(&kept).unwrap().iter().filter(|m| **m).count();
    let frac = kept_matching as f64 / matching as f64;
    assert!((frac - 0.10).abs() < 0.01, "{frac}");
    assert_eq!(kept.n_rows(), d.n_rows() - (matching - kept_matching));
}

#[test]
fn decay_equation_is_recovered_within_bootstrap_errors() {
    let d = simulate::<f64>(&parse_sem(SOURCE_SEM).unwrap(), &dag(HOSPITAL_DAG), 2_000, 6).unwrap();
    let template = Template::parse("const + T + C + expdecay(A)").unwrap();
    let fit = fit_additive_sem(&d, &template, "Y").unwrap();
    assert!(fit.diagnostics.converged);
    let se = bootstrap_standard_errors(&d, &template, "Y", 200, 7).unwrap();
    let truth = [0.0, -0.5, -0.3, 2.0, 0.08];
    for (j, ((got, want), s)) in fit.params().iter().zip(truth).zip(&se).enumerate() {
        assert!((got - want).abs() < 3.0 * s, "parameter {j}: {got} vs {want} (se {s})");
    }
    assert!((fit.sigma - 0.2).abs() < 0.01, "{}", fit.sigma);
}

#[test]
fn true_counterfactual_is_treatment_effect_plus_noise() {
    let spec: SemSpec<f64> = parse_sem(SOURCE_SEM).unwrap();
    let d = simulate(&spec, &dag(HOSPITAL_DAG), 5_000, 8).unwrap();
    let truth = FittedSem::from_law("Y", spec.law("Y").unwrap()).unwrap();
    let cf = estimate_counterfactual(&truth, &d, &names(&["A", "C"])).unwrap();
    let (t, e) = (d.column("T").unwrap(), d.noise("Y").unwrap());
    for i in 0..d.n_rows() {
        assert!((cf[i] - (-0.5 * t[i] + e[i])).abs() < 1e-12);
    }
}

#[test]
fn counterfactual_outcome_varies_less_within_each_class() {
    let spec: SemSpec<f64> = parse_sem(SOURCE_SEM).unwrap();
    let d = simulate(&spec, &dag(HOSPITAL_DAG), 2_000, 9).unwrap();
    let fit = fit_additive_sem(&d, &Template::parse("const + T + C + expdecay(A)").unwrap(), "Y").unwrap();
    let cf = estimate_counterfactual(&fit, &d, &names(&["A", "C"])).unwrap();
    let (t, y) = (d.column("T").unwrap(), d.column("Y").unwrap());
    for class in [0.0, 1.0] {
        let pick = |v: &[f64]| -> Vec<f64> { v.iter().zip(t).filter(|(_, t)| **t == class).map(|(x, _)| *x).collect() };
        assert!(sample_variance(&pick(&cf)) < sample_variance(&pick(y)), "class {class}");
    }
}

#[test]
fn decay_jacobian_matches_central_differences() {
    let d = simulate::<f64>(&parse_sem(SOURCE_SEM).unwrap(), &dag(HOSPITAL_DAG), 200, 10).unwrap();
    let template = Template::parse("const + T + C + expdecay(A)").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let params: Vec<f64> = vec![
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.5..3.0),
            rng.random_range(0.01..0.3),
        ];
        let (_, jac) = residual_jacobian(&template, &params, &d, "Y").unwrap();
        for j in 0..params.len() {
            let h = 1e-6 * params[j].abs().max(1e-3);
            let shifted = |s: f64| {
                let mut p = params.clone();
                p[j] += s;
                residual_jacobian(&template, &p, &d, "Y").unwrap().0
            };
            let (up, down) = (shifted(h), shifted(-h));
            let fd: Vec<f64> = up.iter().zip(&down).map(|(u, l)| (u - l) / (2.0 * h)).collect();
            let num: f64 = fd.iter().zip(&jac[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = jac[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(num / den < 1e-5, "parameter {j}: relative error {}", num / den);
        }
    }
}

#[test]
fn seeded_simulation_and_rejection_are_byte_identical() {
    let spec: SemSpec<f64> = parse_sem(SOURCE_SEM).unwrap();
    let g = dag(HOSPITAL_DAG);
    let run = |seed| {
        let d = simulate(&spec, &g, 500, seed).unwrap();
        let kept = reject_sample(&d, &RowPredicate::equals("T", 0.0), 0.5, seed).unwrap();
        (d.to_csv_string().unwrap(), kept.to_csv_string().unwrap())
    };
    assert_eq!(run(11), run(11));
    assert_ne!(run(11), run(12));
}

/// Means and covariances of the observed columns, with Monte-Carlo standard errors.
fn moments(d: &Dataset<f64>, cols: &[&str]) -> Vec<(String, f64, f64)> {
    let n = d.n_rows() as f64;
    let mut out = Vec::new();
    for (i, a) in cols.iter().enumerate() {
        let x = d.column(a).unwrap();
        out.push((format!("mean {a}"), mean(x), (sample_variance(x) / n).sqrt()));
        for b in &cols[i..] {
            let y = d.column(b).unwrap();
            let (mx, my) = (mean(x), mean(y));
            let prods: Vec<f64> = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).collect();
            out.push((format!("cov {a} {b}"), mean(&prods), (sample_variance(&prods) / n).sqrt()));
        }
    }
    out
}

#[test]
fn split_model_is_observationally_equivalent() {
    let g = dag(SCREENING_DAG);
    let spec = linear_sem(0.8, 2.0, 1.2, -0.7);
    let cf = CounterfactualNode::new("Y", ["C"]);
    let split_graph = node_split(&g, "Y", &cf.intervened).unwrap();
    let split_spec = spec.split(&cf).unwrap();
    let before = simulate(&spec, &g, 100_000, 13).unwrap();
    let after = simulate(&split_spec, &split_graph, 100_000, 14).unwrap();
    for ((name, a, sa), (_, b, sb)) in
        moments(&before, &["T", "C", "Y"]).into_iter().zip(moments(&after, &["T", "C", "Y"]))
    {
        let se = (sa * sa + sb * sb).sqrt();
        assert!((a - b).abs() < 3.0 * se, "{name}: {a} vs {b} (se {se})");
    }
    // The factual outcome is the counterfactual plus the intervened contribution.
    let (y, ycf, c) = (after.column("Y").unwrap(), after.column("Y(C=∅)").unwrap(), after.column("C").unwrap());
    for i in 0..10 {
        assert!((y[i] - (ycf[i] - 0.7 * c[i])).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn empty_intervention_is_the_identity(ys in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let c: Vec<f64> = ys.iter().map(|y| y * 0.5).collect();
        let d = Dataset::from_columns([("Y", ys.clone()), ("C", c)]).unwrap();
        let fit = FittedSem::from_law("Y", parse_sem::<f64>("eq Y = 2*C + 1").unwrap().law("Y").unwrap()).unwrap();
        prop_assert_eq!(estimate_counterfactual(&fit, &d, &BTreeSet::new()).unwrap(), ys);
    }

    #[test]
    fn sequential_interventions_match_joint_intervention(
        rows in prop::collection::vec((-10f64..10.0, 0f64..24.0, -5f64..5.0), 1..40),
        w in (-3f64..3.0, 0.1f64..3.0, 0.01f64..0.5),
    ) {
        let (c, rest): (Vec<f64>, Vec<(f64, f64)>) = rows.iter().map(|&(c, a, y)| (c, (a, y))).unzip();
        let (a, y): (Vec<f64>, Vec<f64>) = rest.into_iter().unzip();
        let spec = format!("eq Y = {}*C + expdecay(A, {}, {})", w.0, w.1, w.2);
        let fit = FittedSem::from_law("Y", parse_sem::<f64>(&spec).unwrap().law("Y").unwrap()).unwrap();
        let d = Dataset::from_columns([("Y", y), ("C", c.clone()), ("A", a.clone())]).unwrap();
        let joint = estimate_counterfactual(&fit, &d, &names(&["A", "C"])).unwrap();
        // Remove A first, then C from the partially normalized column.
        let first = estimate_counterfactual(&fit, &d, &names(&["A"])).unwrap();
        let d2 = Dataset::from_columns([("Y", first), ("C", c), ("A", a)]).unwrap();
        let seq = estimate_counterfactual(&fit, &d2, &names(&["C"])).unwrap();
        prop_assert_eq!(joint, seq);
    }

    #[test]
    fn sem_text_round_trips(
        coefs in prop::collection::vec(-100f64..100.0, 1..4),
        sigma in 0.001f64..10.0,
        p in 0f64..=1.0,
    ) {
        let terms: Vec<String> = coefs.iter().enumerate().map(|(i, c)| format!("{c}*X{i}")).collect();
        let text = format!("eq Y = {} + noise gaussian {sigma}\neq X0 = bernoulli {p}\n", terms.join(" + "));
        let spec: SemSpec<f64> = parse_sem(&text).unwrap();
        prop_assert_eq!(parse_sem::<f64>(&spec.to_string()).unwrap(), spec);
    }
}

#[test]
fn single_precision_pipeline_tracks_double_precision() {
    let g = dag(HOSPITAL_DAG);
    let spec64: cfn_core::SemSpec64 = parse_sem(SOURCE_SEM).unwrap();
    let spec32: cfn_core::SemSpec32 = parse_sem(SOURCE_SEM).unwrap();
    let d64: cfn_core::Dataset64 = simulate(&spec64, &g, 2_000, 21).unwrap();
    let d32: cfn_core::Dataset32 = simulate(&spec32, &g, 2_000, 21).unwrap();
    // Same seed, same draws: the columns differ only by rounding.
    for col in ["T", "C", "A", "Y"] {
        let (a, b) = (d64.column(col).unwrap(), d32.column(col).unwrap());
        let worst = a.iter().zip(b).map(|(x, y)| (x - f64::from(*y)).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "{col}: {worst}");
    }
    let template = Template::parse("const + T + C + expdecay(A)").unwrap();
    let f64_fit = fit_additive_sem(&d64, &template, "Y").unwrap();
    let f32_fit = fit_additive_sem(&d32, &template, "Y").unwrap();
    for (a, b) in f64_fit.params().iter().zip(f32_fit.params()) {
        assert!((a - f64::from(b)).abs() < 1e-2, "{a} vs {b}");
    }
}
