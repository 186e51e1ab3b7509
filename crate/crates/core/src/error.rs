use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("environment not found: {}", .0.display())]
    EnvironmentNotFound(PathBuf),

    #[error("missing upstream artifact {}: run `{stage}` first", .path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("localization failed: {0}")]
    Localization(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("malformed input in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
