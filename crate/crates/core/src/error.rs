use thiserror::Error;

/// Errors raised by the estimation, prediction and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A prior was specified with invalid hyperparameters.
    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    /// An iterative optimizer stopped before meeting its tolerance.
    #[error("optimizer did not converge after {iterations} iterations (last iterate mu={mu}, sigma={sigma})")]
    NonConvergence {
        iterations: usize,
        mu: f64,
        sigma: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
