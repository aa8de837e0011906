use thiserror::Error;

/// Errors raised by the spectral, counting and regression routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("enumeration of {requested} items exceeds the cap of {cap}")]
    ResourceCap { requested: u128, cap: u128 },

    #[error("exact integer overflow while computing {what}")]
    Overflow { what: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degree {degree} exceeds the configured maximum {max}")]
    DegreeExceeded { degree: usize, max: usize },

    #[error("invalid multi-index: {0}")]
    InvalidMultiIndex(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("level coefficient h_{level} is zero; the change of basis is undefined")]
    ZeroLevelCoefficient { level: usize },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("rank {rank} is outside the spectrum of size {size}")]
    RankOutOfRange { rank: usize, size: usize },

    #[error("non-finite value while accumulating {0}")]
    NonFinite(&'static str),

    #[error("zero shrinkage diagonal for {beta}: the kernel has no mass at level {level}")]
    ZeroDiagonal { beta: String, level: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
