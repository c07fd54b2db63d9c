use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Every log-weight (or log-ratio) in a softmax/log-sum-exp was `-inf`.
    #[error("degenerate weights: every log-weight is -inf")]
    DegenerateWeights,

    /// Soft labels could not be formed because every log-ratio was `-inf`.
    #[error("degenerate labels: every log-ratio is -inf for the {k} contrast samples")]
    DegenerateLabels { k: usize, theta: Vec<Vec<f64>> },

    #[error("optimization diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("non-finite evaluation at coordinate {coordinate}")]
    NonFiniteCoordinate { coordinate: usize },

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("value {value} lies outside the support ({lower}, {upper})")]
    OutOfSupport { value: f64, lower: f64, upper: f64 },

    #[error("gradient requested at coordinate {coordinate} on the support boundary; evaluate in the unconstrained parameterization instead")]
    SupportBoundary { coordinate: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("reference posterior rejected: {0}")]
    ReferenceRejected(String),

    #[error("reference standard deviation is zero in dimension {0}")]
    ZeroReferenceStd(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
