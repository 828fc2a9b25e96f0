use thiserror::Error;

/// Failure of a CLI command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("certificate failure: {0}")]
    Certificate(String),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 0 success, 2 config error, 3 divergence, 4 certificate failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Certificate(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<lgadmm::Error> for CliError {
    fn from(e: lgadmm::Error) -> Self {
        use lgadmm::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::TheoryViolation(_)
            | E::BelowSpectralThreshold { .. }
            | E::DimensionMismatch { .. }
            | E::Parse(_) => CliError::Config(e.to_string()),
            E::Divergence { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
