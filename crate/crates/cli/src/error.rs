use roughhawkes::Error as CoreError;
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        let code = match self {
            CliError::ReadConfig { .. } | CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Assumption(_) | CoreError::Unstable { .. } => 3,
                CoreError::NonFinite(_) | CoreError::Range { .. } | CoreError::Numerical(_) => 4,
                _ => 2,
            },
            CliError::Write { .. } => 1,
        };
        ExitCode::from(code)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
