use std::path::PathBuf;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown phone symbol `{0}`")]
    Lookup(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("shape error: expected width {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate model: {0}")]
    Degenerate(String),
    #[error("unsupported format version {found} in {what} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
