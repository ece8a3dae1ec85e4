use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bracketing optimiser ran out of iterations.
    #[error("optimizer did not converge after {iterations} iterations, best bracket [{lo}, {hi}]")]
    Convergence { lo: f64, hi: f64, iterations: usize },

    /// An integration routine could not reach its tolerance.
    #[error("quadrature did not converge: achieved error bound {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// The input is formally valid but numerically degenerate.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
