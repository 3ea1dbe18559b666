use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("inconsistent general model: {0}")]
    InconsistentGeneralModel(String),

    #[error("dilation failure: {0}")]
    DilationFailure(String),

    #[error("singular metric: {0}")]
    SingularMetric(String),

    #[error("non-finite propagator at step {step}{}", trajectory.map(|k| format!(" of trajectory {k}")).unwrap_or_default())]
    NonFinite { trajectory: Option<usize>, step: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
}
