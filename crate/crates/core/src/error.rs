use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("samples have different lengths ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },

    #[error("need at least {required} samples, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("degenerate variance: {0} is constant")]
    DegenerateVariance(&'static str),

    #[error("degenerate variance in column {index}")]
    DegenerateColumn { index: usize },

    #[error("{what} outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid out-of-sample scheme: {0}")]
    InvalidScheme(String),

    #[error("sample {index} was never out-of-bag after {replicates} bootstrap replicates")]
    ResampleCoverage { index: usize, replicates: usize },

    #[error("correlation is zero, sign undefined")]
    UndefinedSign,

    #[error("projection geometry is degenerate (zero spread in direction {anchor})")]
    DegenerateGeometry { anchor: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("invalid configuration key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failure: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
