//! Exit-code contract: 0 ok, 1 configuration, 2 integration, 3 verification.

use std::fmt;

use rodflow_core::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Config(String),
    Integration(String),
    Verification(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Integration(_) => 2,
            Failure::Verification(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Integration(m) => write!(f, "integration failed: {m}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<Error> for Failure {
    /// Bad inputs are configuration errors; everything raised while
    /// integrating or writing results is an integration failure.
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::Parameter(_)
            | Error::GridMismatch(_)
            | Error::Resolution { .. }
            | Error::Degenerate(_) => Failure::Config(e.to_string()),
            Error::Domain(_)
            | Error::NoConvergence { .. }
            | Error::Numerical(_)
            | Error::EarlyTermination { .. }
            | Error::Io(_) => Failure::Integration(e.to_string()),
        }
    }
}
