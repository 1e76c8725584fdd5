use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Variants are split into input problems (bad files, bad ids, violated
/// preconditions) and computation problems (a metric that is undefined
/// for otherwise valid inputs). See [`Error::is_input`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("unknown metric `{name}`; valid names: {valid}")]
    UnknownMetric { name: String, valid: String },

    #[error("undefined input: {0}")]
    UndefinedInput(String),

    #[error("infeasible design: {0}")]
    Infeasible(String),

    #[error("baseline infeasible: the intact system fails the feasibility check")]
    BaselineInfeasible,

    #[error("node `{0}` is a source; its path-based resilience is unbounded")]
    InfiniteResilience(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    /// True for errors caused by the caller's inputs rather than by the
    /// computation itself.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::UnknownId(_)
                | Error::UnknownMetric { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
