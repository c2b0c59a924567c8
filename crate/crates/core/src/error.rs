use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("zero-norm vector{}", .0.as_ref().map(|w| format!(" for word `{w}`")).unwrap_or_default())]
    DegenerateVector(Option<String>),

    #[error("word `{0}` is not in the embedding store")]
    MissingWord(String),

    #[error("column `{0}` has zero variance")]
    DegenerateColumn(String),

    #[error("cascade for article `{article}`: sender `{sender}` is not a known sharer")]
    OrphanEvent { article: String, sender: String },

    #[error("cascade for article `{article}`: {detail}")]
    ClockSkew { article: String, detail: String },

    #[error("cascade for article `{0}` has no share events")]
    EmptyCascade(String),

    #[error("collinear design, offending columns: {}", .0.join(", "))]
    Collinear(Vec<String>),

    #[error("optimizer did not converge: {0}")]
    NoConvergence(String),

    #[error("too few groups: found {found}, need at least {needed}")]
    TooFewGroups { found: usize, needed: usize },

    #[error("sample variance is zero in both samples")]
    DegenerateVariance,

    #[error("{field}: {message}")]
    Manifest { field: String, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
