use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("loss `{loss}` lacks the required regularity constant: {needed}")]
    MissingRegularity { loss: String, needed: &'static str },

    #[error(
        "non-finite gradient at step {step}; the loss or data bounds are probably misdeclared"
    )]
    NonFiniteGradient { step: usize },

    #[error("solver did not reach tolerance {tol:e} within {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error(
        "self-bounding violated at w={w:?}, x={x:?}, y={y}: |grad|={grad_norm}, bound={bound}"
    )]
    SelfBoundingViolation {
        w: Vec<f64>,
        x: Vec<f64>,
        y: f64,
        grad_norm: f64,
        bound: f64,
    },

    #[error("feature vector {index} has norm {norm} above the declared bound {bound}")]
    FeatureBound { index: usize, norm: f64, bound: f64 },

    #[error("dataset of size {n} too small: {reason}")]
    TooFewPoints { n: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
