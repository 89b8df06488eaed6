use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance matrix is not positive definite after jitter")]
    DegenerateCovariance,

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("all weights are zero")]
    AllWeightsZero,

    #[error("invalid limit-state value: {0}")]
    InvalidLsfValue(f64),

    #[error("invalid smoothing parameter: {0}")]
    InvalidSmoothing(f64),

    #[error("symmetric eigensolver did not converge")]
    EigenFailure,

    #[error("limit-state function provides no gradient")]
    MissingGradient,

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("quadrature did not converge (last error estimate {0:e})")]
    QuadratureFailure(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
