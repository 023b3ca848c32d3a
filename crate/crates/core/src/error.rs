use thiserror::Error;

use crate::optim::RunTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Exact enumeration was requested above the configured number of variables.
    #[error("{n} variables exceeds the enumeration cap of {cap}")]
    Capacity { n: usize, cap: usize },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("importance weights are numerically zero")]
    DegenerateWeights,

    /// Carries the trace recorded up to (excluding) the failing iteration.
    #[error("non-finite objective at iteration {k}")]
    NonFinite { k: usize, trace: Box<RunTrace> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
