use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate regressor: {0}")]
    DegenerateRegressor(String),

    #[error("regressors are collinear (relative determinant {rel_det:e})")]
    Collinear { rel_det: f64 },

    #[error("bias denominator is zero: Cov(lnD, eps) sits exactly on the lower bound")]
    Boundary,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no selection direction: lnD is collinear with year")]
    NoSelectionDirection,

    #[error("data generation failed: {0}")]
    Generation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: format error at row {row}: {msg}")]
    Format { path: PathBuf, row: usize, msg: String },

    #[error("{path}: bad value at row {row}: {msg}")]
    Value { path: PathBuf, row: usize, msg: String },

    #[error("{path}: need at least {need} data rows, found {found}")]
    InsufficientData { path: PathBuf, need: usize, found: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest: {0}")]
    Manifest(String),
}

impl Error {
    /// Process exit code for the CLI: 2 for data/format problems, 3 for
    /// numerical failures, 1 for configuration (usage) errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Format { .. }
            | Error::Value { .. }
            | Error::InsufficientData { .. }
            | Error::Io { .. }
            | Error::Manifest(_) => 2,
            Error::Dimension(_)
            | Error::DegenerateRegressor(_)
            | Error::Collinear { .. }
            | Error::Boundary
            | Error::Domain(_)
            | Error::NoSelectionDirection
            | Error::Generation(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
