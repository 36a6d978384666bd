use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown language tag `{tag}` (supported: {supported})")]
    UnknownLanguage { tag: String, supported: String },

    #[error("invalid mutation operator `{id}`: {reason}")]
    InvalidOperator { id: String, reason: String },

    #[error("stale mutant {id}: line {line} no longer matches the generated original")]
    StaleMutant { id: String, line: usize },

    #[error("{path}:{line}: malformed LCOV record: {reason}")]
    LcovParse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("no coverage data for `{0}`")]
    NoCoverageData(String),

    #[error("red baseline: {0}")]
    RedBaseline(String),

    #[error("workspace provisioning failed: {0}")]
    Workspace(String),

    #[error("mutation score undefined: no valid outcomes")]
    UndefinedScore,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unknown report format `{0}` (expected text, json or csv)")]
    UnknownFormat(String),

    #[error("no line-comment prefix known for `{0}`")]
    UnknownCommentPrefix(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Regex(#[from] regex::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
