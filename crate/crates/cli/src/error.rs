use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SELFCHECK: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hybrid_core::Error),
    #[error("cannot read `{path}`: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),
    #[error("cannot write table: {0}")]
    Table(#[from] csv::Error),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use hybrid_core::Error as E;
        match self {
            CliError::Core(E::CutoffTooSmall { .. } | E::Truncation { .. } | E::HeraldImpossible(_) | E::TooLarge { .. }) => {
                EXIT_NUMERICAL
            }
            _ => EXIT_INVALID,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
