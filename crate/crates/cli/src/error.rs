//! CLI error type carrying the process exit code.

use std::fmt;

use tagparse_core::error::Error as CoreError;

/// What went wrong, bucketed by exit code: 1 usage, 2 data, 3 numerical.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config keys, out-of-range tunables.
    Usage(String),
    /// Unreadable, malformed, or inconsistent input files.
    Data(String),
    /// A numerical routine failed or diverged.
    Numerical(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Prefix the message with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{stage}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{stage}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{stage}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            // A precondition violation on data that reached the core means the
            // inputs were unusable, not that the invocation was malformed.
            CoreError::InvalidInput(m) => CliError::Data(m),
            CoreError::Numerical(m) => CliError::Numerical(m),
            CoreError::NonConvergence { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attach a file path to an IO error so the user knows which file failed.
pub fn with_path<T>(
    result: std::io::Result<T>,
    path: &std::path::Path,
) -> Result<T> {
    result.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
