use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown task `{0}` (expected one of esnli, ecqa, comve, sbic)")]
    UnknownTask(String),

    #[error("{path}: row {row}: field `{field}`: {reason}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        field: String,
        reason: String,
    },

    #[error("instance `{id}`: {reason}")]
    InvalidInstance { id: String, reason: String },

    #[error("instance `{id}` is missing field `{field}`")]
    MissingField { id: String, field: String },

    #[error("label `{label}` has {available} instances but {required} are needed (short by {})", required - available)]
    InsufficientLabel {
        label: String,
        available: usize,
        required: usize,
    },

    #[error("corpus has {available} instances left for dev after drawing the training set, {required} needed")]
    InsufficientDev { available: usize, required: usize },

    #[error("invalid prompt variant: {0}")]
    InvalidVariant(String),

    #[error("no demonstration fits within a budget of {budget} characters (test block alone is {test_block} characters)")]
    PackingBudget { budget: usize, test_block: usize },

    #[error("scorer failed on instance `{id}`: {reason}")]
    Scorer { id: String, reason: String },

    #[error("scorer protocol violation: {0}")]
    ScorerProtocol(String),

    #[error("aggregation: {0}")]
    Aggregation(String),

    #[error("no correct predictions in split(s) {0:?}")]
    NoCorrectPredictions(Vec<usize>),

    #[error("annotations: {0}")]
    Annotation(String),

    #[error("fleiss kappa: {0}")]
    Kappa(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}:{line}: {source}", path.display())]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True when the failure is caused by an absent input rather than invalid content.
    pub fn is_missing_artifact(&self) -> bool {
        match self {
            Error::MissingArtifact(_) => true,
            Error::Io { source, .. } => source.kind() == io::ErrorKind::NotFound,
            _ => false,
        }
    }
}
