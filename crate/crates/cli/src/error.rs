use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] riskstop_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {msg}")]
    Malformed { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {msg}")]
    BadContainer { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("probe artifact {path} changed since calibration (sha1 {actual}, expected {expected})")]
    StaleProbe { path: PathBuf, expected: String, actual: String },
    #[error("line {line}: {msg}")]
    Protocol { line: usize, msg: String },
    /// A required input was not supplied or does not exist.
    #[error("missing input: {0}")]
    MissingInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn container(path: impl Into<PathBuf>, msg: impl Into<String>) -> Error {
        Error::BadContainer { path: path.into(), msg: msg.into() }
    }
}
