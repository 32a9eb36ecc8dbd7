use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("nominal propensity must lie in (0, 1], got {value} at row {row}")]
    InvalidPropensity { row: usize, value: f64 },

    #[error(
        "logistic fit did not converge after {iterations} iterations (gradient norm {grad_norm:e})"
    )]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("non-finite value at row {row} ({what})")]
    NonFinite { row: usize, what: &'static str },

    #[error("training diverged at iteration {iteration}: objective {value} (trace prefix {trace_prefix:?})")]
    Divergence {
        iteration: usize,
        value: f64,
        trace_prefix: Vec<f64>,
    },

    #[error("brute-force oracle supports at most {max} rows, got {got}")]
    OracleTooLarge { max: usize, got: usize },

    #[error("missing ground truth: {0}")]
    MissingTruth(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
