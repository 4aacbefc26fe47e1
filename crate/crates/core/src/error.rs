use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not in the interior of the body")]
    NotInterior,

    #[error("degenerate chord of length {0:e}")]
    DegenerateChord(f64),

    #[error("chord is unbounded in direction")]
    UnboundedChord,

    #[error("linear map is singular or numerically non-invertible")]
    SingularMap,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} exceeded its iteration cap of {cap}")]
    IterationCap { what: &'static str, cap: usize },

    #[error(
        "degenerate rounding: second-moment matrix is singular (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e})"
    )]
    DegenerateRounding { sigma_min: f64, sigma_max: f64 },

    #[error("uniform sampling from the bounding box exceeded {0} proposals")]
    InitialSampling(usize),

    #[error("chain is reducible: stationary density is not unique")]
    ReducibleChain,

    #[error("chain violates detailed balance (max residual {0:e})")]
    NonReversible(f64),

    #[error("dense simulation cap exceeded: {0}")]
    CapExceeded(String),

    #[error("mixing precondition failed: {0}")]
    MixingPrecondition(String),

    #[error("overlap {overlap} is below the admissible threshold {threshold}")]
    OverlapTooSmall { overlap: f64, threshold: f64 },

    #[error("radius update does not contract on the first step ({first} -> {next})")]
    NonContracting { first: f64, next: f64 },

    #[error("query budget of {0} units exhausted")]
    BudgetExhausted(u64),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
