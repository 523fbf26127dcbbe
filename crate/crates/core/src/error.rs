use std::path::PathBuf;

/// Errors produced by the synthesis engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: expected {expected} values for {what}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("weight file format error in `{field}`: {detail}")]
    Format { field: String, detail: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("invalid architecture ({}): {message}", nodes.join(", "))]
    Architecture { nodes: Vec<String>, message: String },

    #[error("invalid spec at node `{node}`, field `{field}`: {message}")]
    Spec {
        node: String,
        field: String,
        message: String,
    },

    #[error("wav error: {0}")]
    Wav(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the filesystem rather than by bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
