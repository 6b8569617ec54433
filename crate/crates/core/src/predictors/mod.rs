//! Discriminative models over conditioning sets and their evaluation metrics.

mod metrics;
mod models;

pub use metrics::{auprc, auroc, mse};
pub use models::{
    fit_least_squares, fit_logistic, fit_logistic_with, logistic_gradient, logistic_nll, sigmoid, LinearModel,
    LogisticDiagnostics, LogisticModel, LogisticOptions, Model, Predictor,
};
