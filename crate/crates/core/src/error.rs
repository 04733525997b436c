use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("modulation shift {shift} out of range [0, {n})")]
    ShiftOutOfRange { shift: usize, n: usize },

    #[error("eigensolver did not converge after {restarts} restarts (residual {residual:e})")]
    EigenNonConvergence { restarts: usize, residual: f64 },

    #[error("solver diverged at iteration {iteration} (objective log: {objective_log:?})")]
    Diverged {
        iteration: usize,
        objective_log: Vec<f64>,
    },

    #[error("shift does not generate the frequency group: {0}")]
    NotCoprime(String),

    #[error("DFT vanishes at frequency indices {indices:?}")]
    VanishingDft { indices: Vec<usize> },

    #[error("scrambling mask has a zero weight at index {index}")]
    ZeroMaskWeight { index: usize },

    #[error("reference signal has zero norm")]
    ZeroSignal,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("image format error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
