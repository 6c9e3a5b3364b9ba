use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit codes used by the command-line front end.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const BACKEND: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("token id {id} is outside the vocabulary of size {vocab_size}")]
    IndexOutOfVocab { id: i64, vocab_size: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("lambda {0} is outside [0, 1]")]
    LambdaOutOfRange(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("sequence of {len} tokens exceeds the maximum length {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("input is empty")]
    EmptyInput,

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("text has no augmentable tokens")]
    EmptyText,

    #[error("synonym replacement requested but no synonym table is loaded")]
    NoSynonymSource,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("{path}:{line}: unknown label {label:?}")]
    UnknownLabel {
        path: String,
        line: usize,
        label: String,
    },

    #[error("{0} is empty")]
    EmptyDataset(&'static str),

    #[error("cannot aggregate an empty list")]
    EmptyList,

    #[error("class {label:?} has {available} examples, {requested} requested")]
    InsufficientClassExamples {
        label: String,
        available: usize,
        requested: usize,
    },

    #[error("no results to tabulate")]
    EmptyResults,

    #[error("results do not share the dataset axis: {0}")]
    AxisMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Maps the error onto the CLI exit code contract (2 config, 3 data, 4 backend).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::LambdaOutOfRange(_) | Error::InvalidConfig(_) => exit_code::CONFIG,
            Error::BackendUnavailable(_) | Error::Tensor(_) => exit_code::BACKEND,
            _ => exit_code::DATA,
        }
    }
}
