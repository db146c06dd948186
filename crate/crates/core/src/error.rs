use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("element code {code} is out of range for a group of order {order}")]
    InvalidElement { code: usize, order: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid majorant: {0}")]
    InvalidMajorant(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("{what} needs {required:.3e} elementary operations, budget is {budget:.3e}")]
    BudgetExceeded {
        what: &'static str,
        required: f64,
        budget: f64,
    },

    #[error("N = {n} is below the minimum N_0 = {n0} for these cut-off parameters")]
    TooSmall { n: u64, n0: u64 },

    #[error("search failed: {0}")]
    SearchFailure(String),

    #[error("cube average {0:e} is negative beyond rounding tolerance")]
    NegativeCubeAverage(f64),

    #[error("inequality violated: {0}")]
    InequalityViolated(String),

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
