use thiserror::Error;

/// Failure of a CLI invocation, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Rejected by the argument parser, which already printed the message.
    #[error("invalid arguments")]
    Parse,
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Run(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse => 2,
            _ => 1,
        }
    }
}

impl From<dppm::DppmError> for CliError {
    fn from(e: dppm::DppmError) -> Self {
        use dppm::DppmError::*;
        match e {
            InvalidSpectrum { .. } | InvalidSchedule(_) | DimensionMismatch { .. } | InvalidParameter(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Run(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
