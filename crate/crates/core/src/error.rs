use thiserror::Error;

/// Errors raised by the numerical kernels and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A bump (or other localized feature) spans too few grid cells.
    #[error("under-resolved: {detail}; need at least N = {min_n}")]
    Resolution { detail: String, min_n: usize },

    /// A map failed to be an orientation-preserving diffeomorphism.
    #[error("not a diffeomorphism: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations: worst residual {residual:.3e} at x = {x:.6}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        x: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The probe direction gives a vanishing differential at the probe point.
    #[error("degenerate direction: {0}")]
    Degenerate(String),

    /// Integration terminated before reaching the requested time.
    #[error("integration stopped at t = {time}: {reason}")]
    EarlyTermination { time: f64, reason: String },

    #[error("io: {0}")]
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
