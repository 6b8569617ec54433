//! Additive structural equation models: specification, simulation, fitting and
//! counterfactual estimation.
//!
//! A [`SemSpec`] assigns every node a [`Law`]. [`simulate`] forward-samples a
//! [`Dataset`]; [`fit_additive_sem`] estimates one equation; and
//! [`estimate_counterfactual`] removes the fitted contributions of chosen parents
//! from the factual column.

mod dataset;
mod fit;
mod simulate;
mod spec;

pub use dataset::{Dataset, SELECTED_COLUMN};
pub use fit::{
    bootstrap_standard_errors, estimate_counterfactual, fit_additive_sem, residual_jacobian, FitDiagnostics, FittedSem,
    Template, TermKind,
};
pub use simulate::{mark_rejections, reject_sample, rejection_mask, simulate, true_counterfactual, RowPredicate};
pub use spec::{parse_sem, BetaSwitch, Law, Noise, ScaledBeta, SemSpec, Term};
