use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no temporal extent: all {0} events share one timestamp")]
    NoTemporalExtent(usize),

    #[error("edge list references unknown node id `{0}`")]
    UnknownNode(String),

    #[error("non-finite real cannot be serialized canonically")]
    NonFinite,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("rewiring undefined for {0} representation")]
    NotRewirable(String),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("stale artifact {artifact}: {reason} (rerun upstream stages or pass --force)")]
    Stale { artifact: String, reason: String },

    #[error("artifact {artifact} could not be decoded: {msg}")]
    Decode { artifact: String, msg: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a `(model, label, node)`-style location.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by user configuration rather than runtime failures.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => true,
            Error::Context { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
