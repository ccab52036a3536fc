//! Crate-wide error type.

use alloc::string::String;

/// Errors reported by the pipeline stages.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied value or structure violates a documented precondition.
    InvalidInput(String),
    /// A numerical routine produced an unusable result (singular system,
    /// non-finite intermediate, ...).
    Numerical(String),
    /// An iterative routine stopped short of its target accuracy. Carries the
    /// accuracy it did reach.
    NonConvergence {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Error::NonConvergence {
                what,
                residual,
                tolerance,
            } => write!(
                f,
                "{what} did not converge: residual {residual:.3e} above tolerance {tolerance:.3e}"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
