use thiserror::Error;

/// Errors raised by the operators, Krylov iterations and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (Cholesky pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {lambda_min:e})")]
    NonPositiveSpectrum { lambda_min: f64 },

    #[error("dense oracle limited to n <= {cap}, got n = {n}")]
    OracleTooLarge { n: usize, cap: usize },

    #[error("indefinite operator detected at CG iteration {iteration}: alpha = {alpha:e}")]
    Indefinite { iteration: usize, alpha: f64 },

    #[error("non-positive Ritz value {value:e} in T_{step}")]
    NonPositiveRitz { step: usize, value: f64 },

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("invalid truncation support: i_min = {i_min}, i_max = {i_max}")]
    InvalidSupport { i_min: usize, i_max: usize },

    #[error("probability mass {mass:e} at j = {index} is below the representable floor")]
    MassUnderflow { index: usize, mass: f64 },

    #[error("condition number must be >= 1, got {0}")]
    InvalidConditionNumber(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("requested T_{requested} but only {available} CG iterations were recorded")]
    MissingIterations { requested: usize, available: usize },

    #[error("negative residual diagonal {value:e} at pivot {index}; operator is not PSD after the shift")]
    NegativeResidual { index: usize, value: f64 },

    #[error("operator does not expose dense entries")]
    NoDenseAccess,

    #[error("unknown hyperparameter `{0}`")]
    UnknownHyperparameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
