use thiserror::Error;

/// Errors raised while building states, measurements, verifiers or bounds.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A - A^dagger| = {0:.3e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid Schmidt vector: {0}")]
    InvalidSchmidt(String),

    #[error("invalid chi vector: {0}")]
    InvalidChi(String),

    #[error("invalid noise parameters: {0}")]
    InvalidNoise(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("POVM remainder element is not positive semidefinite (min eigenvalue {0:.3e})")]
    InvalidPovm(f64),

    #[error("basis transform is singular")]
    SingularTransform,

    #[error("operator does not stabilize the target state (residual {0:.3e})")]
    NotStabilizing(f64),

    #[error("invalid verifier weights: {0}")]
    InvalidWeights(String),

    #[error("degenerate bound: {0}")]
    DegenerateBound(String),

    #[error("measurement configuration set is empty")]
    EmptyConfigSet,

    #[error("measurement configuration {index} is out of range for d = {d}")]
    ConfigOutOfRange { index: usize, d: usize },

    #[error("zero probability: {0}")]
    ZeroProbability(String),

    #[error("observable does not match the statistics: {0}")]
    StatsMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
