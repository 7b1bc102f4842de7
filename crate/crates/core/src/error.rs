use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: left is {left:?}, right is {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("data length mismatch: expected {expected}, got {got}")]
    InvalidData { expected: usize, got: usize },

    #[error("matrix dimensions must be positive")]
    EmptyDimension,

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("ensemble kind `{0}` has infinite support and cannot be enumerated")]
    InfiniteSupport(&'static str),

    #[error("enumeration of {support}^{n} outcomes exceeds the 2^20 limit")]
    EnumerationTooLarge { support: usize, n: usize },

    #[error("truncation depth {k} exceeds product length {n}")]
    DepthExceedsLength { k: usize, n: usize },

    #[error("expected {expected} matrices, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("delta must lie in (0, 1/2], got {0}")]
    InvalidDelta(f64),

    #[error("parameter restriction violated: {0}")]
    Restriction(&'static str),

    #[error("k condition fails for k = {k} at n = {n}")]
    KCondition { k: usize, n: usize },

    #[error("block size {k} does not divide ground set size {n}")]
    NotDivisible { n: usize, k: usize },

    #[error("family of {subsets} subsets exceeds the construction cap of {cap}")]
    FamilyTooLarge { subsets: u128, cap: u128 },

    #[error("invalid partition family: {0}")]
    InvalidFamily(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
