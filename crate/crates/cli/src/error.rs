use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Schema violation, unreadable input or rejected module input.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<sicspin_core::Error> for CliError {
    fn from(e: sicspin_core::Error) -> Self {
        use sicspin_core::Error as E;
        match e {
            E::Invalid { .. } | E::Sequence(_) => CliError::Config(e.to_string()),
            E::Unsaturated { .. } | E::SegmentTooShort { .. } | E::Numerical(_) => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
