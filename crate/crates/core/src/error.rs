use thiserror::Error;

/// Errors produced by the fitting, testing and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(
        "iterative convex minorant did not converge after {iterations} iterations \
         (Fenchel violation {violation:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        violation: f64,
        last: Vec<f64>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{failed} of {total} replicates failed, above the 0.1% budget")]
    FailureBudget { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
