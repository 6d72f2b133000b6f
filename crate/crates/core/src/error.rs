use thiserror::Error;

use crate::solver::TraceEntry;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range for axis of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid unfolding mode {0}; expected 1, 2 or 3")]
    InvalidMode(usize),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid ambiguity transform: {0}")]
    InvalidTransform(String),

    #[error("objective became non-finite at iteration {iteration}")]
    Divergence {
        iteration: usize,
        trace: Vec<TraceEntry>,
    },

    #[error("stage {stage} (lambda = {lambda:e}) failed: {source}")]
    Stage {
        stage: usize,
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("output {0} has zero variance over the evaluation set")]
    ZeroVariance(usize),

    #[error("rejection sampling exceeded {0} attempts; collinearity cap not attainable")]
    RejectionBudgetExceeded(usize),

    #[error("unknown builtin system `{0}`")]
    UnknownSystem(String),

    #[error("SVD failed to converge")]
    SvdFailed,

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that originate in the numerics rather than in the
    /// caller's configuration or inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::SvdFailed | Error::NonFinite(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
