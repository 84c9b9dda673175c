use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] sepmp_core::Error),

    #[error("cannot serialize output: {0}")]
    Serialize(String),
}

impl CliError {
    /// 1 for invalid input, 3 for a simulation that broke down.
    pub fn exit_code(&self) -> i32 {
        use sepmp_core::Error as E;
        match self {
            CliError::Core(E::NonFiniteState { .. } | E::PositivityViolation { .. } | E::Explosion { .. }) => 3,
            _ => 1,
        }
    }
}
