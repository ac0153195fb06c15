use thiserror::Error;

use crate::ao_driver::PowerAllocation;

pub type Result<T, E = RelayError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RelayError {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A named configuration field holds an invalid value.
    #[error("{field} {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("ill-conditioned effective channel (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    /// Dual bracket could not be established.
    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("infeasible: {constraint}")]
    Infeasible { constraint: String },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("alternating optimization stopped at iteration {iteration}: {source}")]
    PartialResult {
        iteration: usize,
        last: Box<PowerAllocation>,
        #[source]
        source: Box<RelayError>,
    },

    #[error("objective increased by {increase:.3e} at iteration {iteration}")]
    NonMonotone { iteration: usize, increase: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RelayError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        RelayError::Domain(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        RelayError::Infeasible { constraint: msg.into() }
    }
}
