use thiserror::Error;

/// Errors raised across the simulator and the verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected {expected} entries, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature too coarse: estimated error {estimate:e} exceeds {tolerance:e}")]
    QuadratureTooCoarse { estimate: f64, tolerance: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("solver aborted at t = {t:e} (step {step}): {reason}")]
    SolverAbort { t: f64, step: usize, reason: String },

    #[error("hypothesis violated for the pair x = {x}, y = {y}: {detail}")]
    HypothesisViolated { x: f64, y: f64, detail: String },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(line: usize, msg: impl Into<String>) -> Self {
        Error::Config { line, message: msg.into() }
    }
}
