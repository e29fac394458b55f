use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("label column {0} not found in header")]
    MissingLabelColumn(String),
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("non-finite feature at row {row}, column {column}")]
    NonFinite { row: usize, column: String },
    #[error("dataset has a single class; classification needs at least two")]
    SingleClass,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class {class} has {count} instance(s); cannot stratify")]
    CannotStratify { class: usize, count: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero-norm feature vector at instance {0}; cosine similarity undefined")]
    ZeroNorm(usize),
    #[error("kernel matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("malformed kernel file: {0}")]
    KernelFormat(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
