//! Stable conditioning sets, node-splitting and counterfactual normalization
//! for causal DAGs, with the simulation, fitting and evaluation pieces needed
//! to run the shift experiments end to end.
//!
//! Numeric code is generic over [`scalar::Scalar`]; the aliases below fix the
//! scalar type for the common cases.

pub mod complexity;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod predictors;
pub mod rng;
pub mod scalar;
pub mod sem;
pub mod stability;

pub use error::{Error, Result};

pub type Dataset64 = sem::Dataset<f64>;
pub type Dataset32 = sem::Dataset<f32>;
pub type SemSpec64 = sem::SemSpec<f64>;
pub type SemSpec32 = sem::SemSpec<f32>;
pub type FittedSem64 = sem::FittedSem<f64>;
pub type FittedSem32 = sem::FittedSem<f32>;
pub type LinearModel64 = predictors::LinearModel<f64>;
pub type LinearModel32 = predictors::LinearModel<f32>;
pub type LogisticModel64 = predictors::LogisticModel<f64>;
pub type LogisticModel32 = predictors::LogisticModel<f32>;
pub type LabeledPointSet64 = complexity::LabeledPointSet<f64>;
pub type LabeledPointSet32 = complexity::LabeledPointSet<f32>;
pub type ComplexityReport64 = complexity::ComplexityReport<f64>;
pub type ComplexityReport32 = complexity::ComplexityReport<f32>;
