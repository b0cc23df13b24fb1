use thiserror::Error;

/// Errors for kernel, estimator, solver, and harness operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the kernel support {support}")]
    OutsideSupport { point: Vec<f64>, support: String },

    #[error("operation requires a kernel with an explicit eigensystem")]
    NoEigensystem,

    #[error("kernel has no decay profile")]
    NoDecayProfile,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("action set is empty")]
    EmptyActionSet,

    #[error("comparator lies on the simplex boundary (log barrier is infinite there)")]
    BoundaryComparator,

    #[error("matrix eigenvalue {0} outside [0, 1] beyond tolerance")]
    EigenvalueRange(f64),

    #[error("root finder failed to converge: residual {0}")]
    RootFind(f64),

    #[error("at least {needed} data points required, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("loss sequence is not replayable: {0}")]
    MissingReplay(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
