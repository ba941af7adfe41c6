use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid dimension {0}: directions need d >= 2")]
    InvalidDimension(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported by analytics: {0}")]
    UnsupportedAnalytics(String),

    #[error(
        "infeasible target {target}: expected count must lie strictly between 0 and {bound} \
         (half of all {pairs} pairs)"
    )]
    Infeasible { target: f64, bound: f64, pairs: f64 },

    #[error("numeric convergence failure: {0}")]
    NumericConvergence(String),

    #[error("edge limit exceeded: more than {limit} edges (raise FTM_MAX_EDGES to allow)")]
    EdgeLimit { limit: u64 },

    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    #[error("too few samples: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
