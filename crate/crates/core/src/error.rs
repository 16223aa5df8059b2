use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("{path}: truncated record at byte offset {offset}")]
    TruncatedRecord { path: PathBuf, offset: u64 },

    #[error("{path}: header declares {declared} points but file holds {found}")]
    CountMismatch {
        path: PathBuf,
        declared: u64,
        found: u64,
    },

    #[error("{path}: trailing bytes after the {declared} declared points")]
    TrailingBytes { path: PathBuf, declared: u64 },

    #[error("label length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: u64, actual: u64 },

    #[error("invalid label {label} at position {position}")]
    InvalidLabel { label: u8, position: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("degenerate bounds: {0}")]
    DegenerateBounds(String),

    #[error("window {name} needs {pixels} pixels, cap is {cap}")]
    WindowTooLarge { name: String, pixels: u64, cap: u64 },

    #[error("missing prediction raster for window {0}")]
    MissingPrediction(String),

    #[error("duplicate window_id {0}")]
    DuplicateWindow(u64),

    #[error("prediction for window {window_id}: {reason}")]
    PredictionMismatch { window_id: u64, reason: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
