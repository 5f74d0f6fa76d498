use thiserror::Error;

use crate::solver::RewardVector;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The starting point has a −∞ objective (coincident coordinates under a
    /// utility that is singular at zero).
    #[error("objective is -inf at the initial point")]
    BadInit,

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        partial: Box<RewardVector>,
    },

    #[error("inapplicable: {0}")]
    Inapplicable(String),

    #[error("quadrature did not converge (estimated error {estimate:.3e})")]
    Quadrature { estimate: f64 },

    #[error("prompt {id}: {source}")]
    Prompt {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
