use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("QMC sample size must be a power of two (N = 2^p), got {0}")]
    NotPowerOfTwo(usize),
    #[error(
        "{dims} dimensions requested but the Sobol' direction-number table supports at most {max}"
    )]
    DimensionTooLarge { dims: usize, max: usize },
    #[error("probability {0} outside the open interval (0, 1)")]
    InvalidProbability(f64),
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("direct formulas assume independent inputs; use dlr for model {model}")]
    DependentInputs { model: String },
    #[error("degenerate model (zero variance)")]
    DegenerateVariance,
    #[error("invalid bin schedule: {0}")]
    BinSchedule(String),
    #[error("RMSE requires analytic reference values, none available for {0}")]
    MissingAnalytic(String),
    #[error("rate fit needs at least 4 points with nonzero RMSE, got {0}")]
    TooFewPoints(usize),
    #[error("unknown {what} '{name}'")]
    UnknownName { what: &'static str, name: String },
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
