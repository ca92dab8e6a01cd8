use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` out of range: {value} (expected {expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("path set mismatch: expected {expected:?}, found {found:?}")]
    PathSetMismatch {
        expected: crate::modes::PathSet,
        found: crate::modes::PathSet,
    },

    #[error("cannot normalize a zero state")]
    ZeroState,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fit is underdetermined: {samples} samples, need at least {required}")]
    Underdetermined { samples: usize, required: usize },

    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("invalid scan: {0}")]
    InvalidScan(String),

    #[error("invalid count table: {0}")]
    InvalidCounts(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn out_of_range(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::OutOfRange { name, value, expected }
    }
}
