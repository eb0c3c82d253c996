use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid membership function: {0}")]
    InvalidMf(String),

    #[error("shape mismatch: expected {expected} {what}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Every rule produced (numerically) zero firing strength.
    #[error("degenerate firing: all rule strengths sum below {threshold:e}")]
    DegenerateFiring { threshold: f64 },

    #[error("non-finite parameter `{parameter}` after update at step {step}")]
    NonFiniteUpdate { parameter: &'static str, step: u64 },

    #[error("plant output diverged at step {step} (|y| = {value:e})")]
    Diverged { step: u64, value: f64 },

    #[error("cannot compute RMSE of an empty sequence")]
    EmptySequence,

    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("run {run} failed: {source}")]
    RunFailed {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True when the root cause is plant divergence, looking through run wrappers.
    pub fn is_diverged(&self) -> bool {
        match self {
            Error::Diverged { .. } => true,
            Error::RunFailed { source, .. } => source.is_diverged(),
            _ => false,
        }
    }
}
