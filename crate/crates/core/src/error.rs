use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON. `offset` is a byte offset into the file.
    #[error("parse error in {path} at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("validation error in {context}: {message}")]
    Validation { context: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The scorer could not be reached. Retrying may succeed.
    #[error("entailment transport error: {0}")]
    Transport(String),

    #[error("entailment protocol error: {0}")]
    Protocol(String),

    #[error("no cached entailment score for premise {premise:?} / hypothesis {hypothesis:?}")]
    CacheMiss { premise: String, hypothesis: String },

    #[error("metric {metric} failed on candidate #{index} ({candidate:?}): {source}")]
    Metric {
        metric: String,
        index: usize,
        candidate: String,
        #[source]
        source: Box<Error>,
    },

    #[error("pruning removed every candidate from the tree")]
    EmptyTree,

    #[error("candidate pool exhausted: ranked {ranked} of {requested}")]
    Exhausted { ranked: usize, requested: usize },

    #[error("data error in {context}: {message}")]
    Data { context: String, message: String },

    #[error("missing predictions for {count} turn(s), e.g. {examples}")]
    Coverage { count: usize, examples: String },

    #[error("unknown service {0:?}")]
    UnknownService(String),

    #[error("need {needed} variant(s) but only {available} available")]
    InsufficientVariants { needed: usize, available: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn data(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Whether retrying the same call could plausibly succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport(_))
    }
}

/// Converts a serde_json error position (1-based line/column) into a byte offset.
pub(crate) fn json_error_offset(text: &str, err: &serde_json::Error) -> usize {
    let line = err.line();
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + err.column().saturating_sub(1)).min(text.len())
}
