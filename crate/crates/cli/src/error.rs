use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_EXTERNAL: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] deconv::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}, line {line}: {message}")]
    Input {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Fetch(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Core(e) => match e {
                deconv::Error::InvalidArgument(_) | deconv::Error::Parse { .. } => EXIT_USAGE,
                deconv::Error::Io(_) => EXIT_EXTERNAL,
                _ => EXIT_NUMERICAL,
            },
            Self::Usage(_) | Self::Input { .. } | Self::Read { .. } => EXIT_USAGE,
            Self::Numerical(_) => EXIT_NUMERICAL,
            Self::Write { .. } | Self::Fetch(_) => EXIT_EXTERNAL,
        }
    }

    /// Extra guidance printed after the message.
    pub fn hint(&self) -> Option<&'static str> {
        match self {
            Self::Core(deconv::Error::DegenerateCarrier { .. }) => Some(
                "the carrier vanishes on part of the grid; rerun with --floor 1e-10 \
                 (or another small fraction of its maximum)",
            ),
            _ => None,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
