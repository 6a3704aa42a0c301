use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("node id {id} out of range for graph with {node_count} nodes")]
    InvalidNode { id: u64, node_count: usize },

    #[error("unknown node label `{0}`")]
    UnknownLabel(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot split {n} nodes into {k} balanced non-empty partitions")]
    InfeasibleBalance { k: usize, n: usize },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("data corruption: {0}")]
    DataCorruption(String),

    #[error("link-prediction split is degenerate: {0}")]
    SplitDegenerate(String),

    #[error("leaf {leaf} failed after retry: {source}")]
    LeafFailed {
        leaf: String,
        #[source]
        source: Box<Error>,
    },

    #[error("segment of leaf {leaf} is unavailable ({path}): {source}")]
    MissingSegment {
        leaf: String,
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status: 1 for configuration problems, 2 for input/output
    /// problems, 3 for failures inside the pipeline or its data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InfeasibleBalance { .. } => 1,
            Error::Parse { .. }
            | Error::UnknownLabel(_)
            | Error::InvalidNode { .. }
            | Error::File { .. }
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Contract(_)
            | Error::Integrity(_)
            | Error::DataCorruption(_)
            | Error::SplitDegenerate(_)
            | Error::LeafFailed { .. }
            | Error::MissingSegment { .. } => 3,
        }
    }

    pub fn file(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::File {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
