use thiserror::Error;

/// Why a probability array or channel failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("shape mismatch: expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("zero-length alphabet in dims {0:?}")]
    EmptyAlphabet(Vec<usize>),
    #[error("negative entry {value} at flat index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("non-finite entry at flat index {index}")]
    NonFinite { index: usize },
    #[error("sum is {sum}, off by {deviation} (tolerance {tol})")]
    Sum { sum: f64, deviation: f64, tol: f64 },
    #[error("row {row} sums to {sum} (tolerance {tol})")]
    RowSum { row: usize, sum: f64, tol: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(Violation),
    #[error("invalid channel: {0}")]
    InvalidChannel(Violation),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{what} cap exceeded: {requested} > {cap}")]
    CapExceeded {
        what: &'static str,
        requested: usize,
        cap: usize,
    },
    #[error("index {index} out of range for alphabet of size {size}")]
    OutOfRange { index: usize, size: usize },
    #[error("conditioning on zero-probability symbol z={0}")]
    ZeroProbability(usize),
    #[error("empty variable selection")]
    EmptySelection,
    #[error("value {0} outside [0, 1]")]
    NotAProbability(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid instrument tree: {0}")]
    InvalidTree(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
