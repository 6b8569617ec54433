use thiserror::Error;

use crate::graph::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("invalid graph:\n{0}")]
    InvalidGraph(ValidationReport),

    #[error("graph contains a directed cycle through `{node}`")]
    Cycle { node: String },

    #[error("invalid node split: {0}")]
    InvalidSplit(String),

    #[error("invalid conditioning set: {0}")]
    InvalidConditioning(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("no structural equation for node `{0}`")]
    MissingEquation(String),

    #[error("invalid structural equation model: {0}")]
    InvalidSem(String),

    #[error("rank-deficient design; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("labels contain a single class")]
    SingleClass,

    #[error("labels contain no positive examples")]
    NoPositives,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("normalization plan mismatch: expected {expected}, found {found}")]
    PlanMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for faults caused by malformed user input (graph or model files),
    /// as opposed to numerical or I/O failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::UnknownNode(_)
                | Error::InvalidGraph(_)
                | Error::Cycle { .. }
                | Error::InvalidSplit(_)
                | Error::InvalidConditioning(_)
                | Error::Parse { .. }
                | Error::MissingEquation(_)
                | Error::InvalidSem(_)
                | Error::InvalidConfig(_)
        )
    }
}
