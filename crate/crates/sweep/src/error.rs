use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Core(#[from] dichro_core::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{failed} of {total} sweep cells failed (more than 5%); first failure: {first}")]
    TooManyFailures { failed: usize, total: usize, first: String },
}

impl SweepError {
    /// 1 for violated physics invariants, 2 for everything caused by the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            SweepError::Core(dichro_core::Error::Physics { .. }) | SweepError::TooManyFailures { .. } => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SweepError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = SweepError> = std::result::Result<T, E>;
