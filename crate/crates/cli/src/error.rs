use std::path::{Path, PathBuf};

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INTEGRITY: i32 = 3;
pub const EXIT_REJECT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("integrity failure: {0}")]
    Integrity(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] paperprint_core::Error),
    /// Raised by the fault-injection hook in place of a crash.
    #[error("interrupted at fault point '{0}'")]
    Interrupted(&'static str),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Integrity(_) => EXIT_INTEGRITY,
            _ => EXIT_INVALID,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
