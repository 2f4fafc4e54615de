use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid threshold {0}; must be finite and >= 0")]
    InvalidThreshold(f64),

    #[error("invalid variance {0}; must be finite and > 0")]
    InvalidVariance(f64),

    #[error("projection onto a zero signal is undefined")]
    UndefinedProjection,

    #[error("degenerate GS model (alpha = {alpha}, v = {v})")]
    DegenerateModel { alpha: f64, v: f64 },

    #[error("quadrature failed to converge (residual estimate {residual:e})")]
    QuadratureFailure { residual: f64 },

    #[error("strategy not supported for this prototype: {0}")]
    UnsupportedStrategy(String),

    #[error("denoiser is not contracting: v_post = {v_post} exceeds v_in = {v_in}")]
    NonContractingDenoiser { v_post: f64, v_in: f64 },

    #[error("singular normalization: B = {0} with ep-normalize")]
    SingularNormalization(f64),

    #[error("divergence at iteration {iteration}: {what}")]
    Divergence { iteration: usize, what: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("experiment failed: {0}")]
    ExperimentFailure(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
