use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error("record {record}: sentiment {value} outside [-1, 1]")]
    Range { record: usize, value: f64 },

    #[error("record {record}: field `{field}` is empty")]
    EmptyField { record: usize, field: &'static str },

    #[error("need at least {needed} sentence groups, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("word vector format error: {0}")]
    Format(String),

    #[error("duplicate word in vocabulary: {0:?}")]
    DuplicateWord(String),

    #[error("word not in vocabulary: {0:?}")]
    UnknownWord(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty batch")]
    EmptyBatch,

    #[error("forward caches do not match the batch: {0}")]
    CacheMismatch(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("no predictions were supplied")]
    NoAnswers,

    #[error("missing prediction for instance {0:?}")]
    MissingPrediction(String),

    #[error("prediction for unknown instance {0:?}")]
    UnknownInstance(String),

    #[error("model does not match its vocabulary: {0}")]
    VocabularyMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Training,
    Evaluation,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Training => 4,
            ErrorCategory::Evaluation => 5,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            Config(_) => ErrorCategory::Config,
            Parse { .. } | Range { .. } | EmptyField { .. } | Format(_) | DuplicateWord(_)
            | UnknownWord(_) | VocabularyMismatch(_) | Io { .. } | UnknownInstance(_) => {
                ErrorCategory::Data
            }
            InsufficientData { .. } | DimensionMismatch { .. } | NonFinite(_) | EmptyBatch
            | CacheMismatch(_) | EmptyDataset(_) => ErrorCategory::Training,
            NoAnswers | MissingPrediction(_) => ErrorCategory::Evaluation,
        }
    }
}
