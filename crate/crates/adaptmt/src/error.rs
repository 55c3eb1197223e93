use std::path::PathBuf;

/// Errors from file formats, persistence and the server.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] adaptmt_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
    #[error("checkpoint parse error: {0}")]
    CorruptCheckpoint(String),
    #[error("XML parse error at line {line}: {message}")]
    Xml { line: usize, message: String },
    #[error("unsupported pelog version `{0}`")]
    UnsupportedVersion(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
