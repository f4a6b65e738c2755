use thiserror::Error;

/// Errors raised across the library. Variants carry enough context to
/// locate the offending input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid size {n}: need a power of two >= 16")]
    InvalidGridSize { n: usize },

    #[error("grid mismatch: expected n = {expected}, got n = {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("family violates hypothesis: {0}")]
    InvalidFamily(String),

    #[error("direction field violates hypothesis: {0}")]
    InvalidDirectionField(String),

    #[error("projection did not converge at ({x}, {y}): residual {residual:e}")]
    ProjectionDiverged { x: f64, y: f64, residual: f64 },

    #[error("scale index {index} outside admissible range [{lo}, {hi}]")]
    ScaleOutOfRange { index: i64, lo: i64, hi: i64 },

    #[error("degenerate dyadic interval: {0}")]
    DegenerateInterval(String),

    #[error("window [{lo}, {hi}] leaves the sampled domain [0, {len}) and wrapping is off")]
    WindowOutsideData { lo: f64, hi: f64, len: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("operator is not linear: relative defect {defect:e}")]
    NotLinear { defect: f64 },

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
