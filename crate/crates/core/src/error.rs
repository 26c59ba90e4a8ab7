use std::io;
use std::path::PathBuf;

use crate::model::Quad;
use crate::store::Hash;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("malformed fact line: {0}")]
    MalformedLine(String),
    #[error("malformed query: {0}")]
    MalformedQuery(String),
    #[error("variable ?{0} is not bound")]
    UnboundVariable(String),
    #[error("oracle input too large: {quads} quads, {patterns} patterns")]
    OracleTooLarge { quads: usize, patterns: usize },

    #[error("storage failure at {path}: {source}")]
    StorageFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("unknown object {0}")]
    UnknownObject(Hash),
    #[error("unknown parent {0}")]
    UnknownParent(Hash),
    #[error("corrupt object {hash}: {reason}")]
    CorruptObject { hash: Hash, reason: String },
    #[error("invalid commit: {0}")]
    InvalidCommit(String),

    #[error("path is not empty: {0}")]
    PathNotEmpty(PathBuf),
    #[error("{principal} is not the owner of this repository")]
    NotOwner { principal: String },
    #[error("authentication failed")]
    AuthFailed,
    #[error("no synchronization base; repository was not cloned from a master")]
    UnrelatedHistories,
    #[error("push rejected: {} quads not permitted", .0.len())]
    PushRejected(Vec<Quad>),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("scenario failure: {0}")]
    ScenarioFailure(String),
    #[error("property violation: {0}")]
    PropertyViolation(String),
}

impl Error {
    /// Stable error name used on the command line and in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidTerm(_) => "InvalidTerm",
            Error::MalformedLine(_) => "MalformedLine",
            Error::MalformedQuery(_) => "MalformedQuery",
            Error::UnboundVariable(_) => "UnboundVariable",
            Error::OracleTooLarge { .. } => "OracleTooLarge",
            Error::StorageFailure { .. } => "StorageFailure",
            Error::UnknownObject(_) => "UnknownObject",
            Error::UnknownParent(_) => "UnknownParent",
            Error::CorruptObject { .. } => "CorruptObject",
            Error::InvalidCommit(_) => "InvalidCommit",
            Error::PathNotEmpty(_) => "PathNotEmpty",
            Error::NotOwner { .. } => "NotOwner",
            Error::AuthFailed => "AuthFailed",
            Error::UnrelatedHistories => "UnrelatedHistories",
            Error::PushRejected(_) => "PushRejected",
            Error::InvalidPolicy(_) => "InvalidPolicy",
            Error::ScenarioFailure(_) => "ScenarioFailure",
            Error::PropertyViolation(_) => "PropertyViolation",
        }
    }

    pub(crate) fn storage(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::StorageFailure {
            path: path.into(),
            source,
        }
    }
}
