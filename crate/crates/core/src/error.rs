use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid dimension N = {0}: need N >= 2")]
    InvalidDimension(usize),

    #[error("N = {dim} with 2α+μ = {weight} is not covered by any regularity case")]
    UncoveredRange { dim: usize, weight: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("integral diverges: {0}")]
    DivergentIntegral(String),

    #[error("no convergence: {0}")]
    Nonconvergence(String),

    #[error("singular linear system at row {0}")]
    SingularSystem(usize),

    #[error("function vanishes identically")]
    ZeroFunction,

    #[error("nonlocal term vanishes")]
    ZeroNonlocal,

    #[error("wrong mode: {0}")]
    WrongMode(String),

    #[error("no nontrivial solution exists: {0}")]
    Nonexistence(String),

    #[error("fitting window contains no usable nodes")]
    EmptyWindow,

    #[error("integrand evaluated to a non-finite value")]
    NonfiniteSample,

    #[error("exponents violate the weighted HLS relation")]
    ExponentRelation,

    #[error("bump supports overlap: {0}")]
    Overlap(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
