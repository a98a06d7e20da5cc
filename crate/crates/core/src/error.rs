use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("schema error: missing column(s) {}", .0.join(", "))]
    MissingColumns(Vec<String>),

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("insufficient data: need at least {needed} {what}, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("singular design matrix (condition estimate {condition:.3e}); offending column(s): {}", .columns.join(", "))]
    SingularDesign {
        condition: f64,
        columns: Vec<String>,
    },

    #[error("R-squared undefined: target has zero variance")]
    UndefinedVariance,

    #[error("not enough degrees of freedom: n = {n} must exceed k + 1 = {}", .k + 1)]
    DegreesOfFreedom { n: usize, k: usize },

    #[error("cannot encode value {value:?} of column {column}: unknown category")]
    UnknownCategory { column: String, value: String },

    #[error("training diverged: non-finite parameters after epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("unsupported schema version {0}")]
    UnknownVersion(u32),

    #[error("corrupted document: {0}")]
    Corrupt(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("cannot resolve {0}")]
    Unresolvable(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("session is closed")]
    SessionClosed,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
