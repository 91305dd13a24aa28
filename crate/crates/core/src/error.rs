use thiserror::Error;

use crate::payout::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    /// Payout evaluation failed (division by zero, log of a non-positive value, ...).
    #[error("evaluation failed at {point:?}: {reason}")]
    Evaluation { point: Vec<f64>, reason: String },

    #[error("point {point:?} lies outside the payout domain")]
    OutOfDomain { point: Vec<f64> },

    /// The payout is not compatible; the closed form does not apply.
    #[error("payout is not compatible ({witness}); use the multi-marginal LP solver instead")]
    Incompatible { witness: String },

    #[error("hypothesis violated for variable {variable}: {reason}")]
    HypothesisViolation { variable: String, reason: String },

    #[error("problem size {size} exceeds the guard of {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("quadrature did not converge: last estimate {last}, previous {previous}")]
    Quadrature { last: f64, previous: f64 },

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("solver stopped after {iterations} iterations without converging")]
    IterationLimit { iterations: usize },

    /// A solver returned a result that fails its own feasibility check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
