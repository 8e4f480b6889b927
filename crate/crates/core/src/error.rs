use thiserror::Error;

/// Errors raised by the link-level building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shaping spec: {0}")]
    InvalidSpec(String),

    #[error("degenerate constellation: {0}")]
    DegenerateConstellation(String),

    #[error("invalid rate: k_s = {k_s} exceeds n_s = {n_s}")]
    InvalidRate { k_s: usize, n_s: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("encoder setup failed: {0}")]
    EncodingSetup(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("equalizer undefined: channel estimate is zero and N0 = 0")]
    UndefinedEqualizer,

    #[error("target rate {target} bits unreachable (capacity saturates at {reached:.4} bits)")]
    Saturation { target: f64, reached: f64 },

    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    FeatureMismatch { expected: usize, actual: usize },

    #[error("training diverged at step {step}: {msg}")]
    Divergence { step: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by numerics rather than inputs or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::Saturation { .. } | Error::UndefinedEqualizer
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
