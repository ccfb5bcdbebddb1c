use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the command-line tool to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty data file")]
    EmptyFile,

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    /// `row` is 1-based and counts data rows (the header is not a row).
    #[error("row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("class {0} is absent from the data")]
    MissingClass(u8),

    #[error("covariate count {k} outside 1..={cap}; larger model spaces need model-space sampling, which is not implemented")]
    ModelSpaceTooLarge { k: usize, cap: usize },

    #[error("logistic fit of model {mask:#b} did not converge after {iterations} iterations")]
    NonConvergence {
        mask: u32,
        iterations: usize,
        last_coeffs: Vec<f64>,
    },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid credal set: {0}")]
    InvalidCredalSet(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{k} covariates exceed the vertex enumeration cap of {cap}; enable the local optimizer")]
    VertexCapExceeded { k: usize, cap: usize },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonConvergence { .. } => ErrorKind::Numerical,
            Error::Config(_)
            | Error::InvalidPrior(_)
            | Error::InvalidCredalSet(_)
            | Error::VertexCapExceeded { .. }
            | Error::ModelSpaceTooLarge { .. } => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
