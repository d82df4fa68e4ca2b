use std::path::PathBuf;

use crate::solve::Diagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dense materialization of {requested} entries exceeds the cap of {cap}")]
    CapExceeded { cap: usize, requested: usize },

    #[error("operator has rank 0, no signal path to recover")]
    RankZero,

    #[error("solver diverged at iteration {iter}: {reason}")]
    Diverged {
        iter: usize,
        reason: String,
        diagnostics: Box<Diagnostics>,
    },

    #[error("solver degenerate at iteration {iter}: {reason}")]
    Degenerate {
        iter: usize,
        reason: String,
        diagnostics: Box<Diagnostics>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported wav format: {0}")]
    UnsupportedWav(String),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Partial diagnostics carried by a solver failure, if any.
    pub fn diagnostics(&self) -> Option<&Diagnostics> {
        match self {
            Error::Diverged { diagnostics, .. } | Error::Degenerate { diagnostics, .. } => {
                Some(diagnostics)
            }
            _ => None,
        }
    }

    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Diverged { .. } | Error::Degenerate { .. })
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}
