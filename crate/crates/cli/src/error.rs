use thiserror::Error;

use condensate_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("verification failed: {0}")]
    Verify(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// 1 I/O, 2 configuration, 3 blow-up or stiffness, 4 failed verification.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Verify(_) => 4,
            CliError::Core(e) => match e {
                CoreError::Io(_) => 1,
                CoreError::Config(_)
                | CoreError::Range { .. }
                | CoreError::NoCondensation { .. }
                | CoreError::FitWindow(_)
                | CoreError::DegenerateWindow(_)
                | CoreError::Resolution(_) => 2,
                CoreError::BlowUp { .. }
                | CoreError::Stiffness { .. }
                | CoreError::Numeric(_)
                | CoreError::Structural(_)
                | CoreError::HeadUnavailable
                | CoreError::Oracle(_) => 3,
            },
        }
    }
}
