use thiserror::Error;

/// Exit code 2: configuration or input problems.
/// Exit code 3: numerical failures (singular W, overflow, ...).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] aies_core::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Core(e) => match e {
                aies_core::Error::Numerical(_) | aies_core::Error::InvalidState(_) => 3,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
