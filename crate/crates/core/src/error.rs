use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("empty input to {0}")]
    Empty(&'static str),

    #[error("label index {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("attention over a sequence with every position masked")]
    AllPadded,

    #[error("backward called before a forward pass was recorded")]
    BackwardWithoutForward,

    #[error("non-finite gradient in parameter `{0}`; optimizer step rejected")]
    NonFiniteGradient(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {reason}")]
    Record { line: usize, reason: String },

    #[error("corpus {path}: no valid records")]
    NoRecords { path: PathBuf },

    #[error("split `{0}` would be empty")]
    EmptySplit(&'static str),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("featurizer mismatch: {0}")]
    Featurizer(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
