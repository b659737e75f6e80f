use alloc::boxed::Box;
use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("strongly convex stopping needs the optimal value, which this problem does not know")]
    MissingGroundTruth,

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { iteration: usize, what: &'static str },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("coupling infeasible at step {step}: success probability {p_prime} is below {p}")]
    CouplingInfeasible { step: usize, p_prime: f64, p: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("replication {index}: {source}")]
    Replication { index: u64, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
