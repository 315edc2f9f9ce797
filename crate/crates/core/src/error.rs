use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid filter spec: {0}")]
    InvalidSpec(String),

    #[error("recording shorter than one 30 s epoch ({0:.3} s)")]
    EmptyGrid(f64),

    #[error("flat signal: post-clip std {0:e} below threshold")]
    FlatSignal(f64),

    #[error("unsupported resampling: source rate {source_hz} Hz is below target {target_hz} Hz")]
    UnsupportedRate { source_hz: f64, target_hz: f64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("empty batch: no valid labeled positions")]
    EmptyBatch,

    #[error("empty evaluation: no valid labeled positions")]
    EmptyEval,

    #[error("optimizer state inconsistent: {0}")]
    Consistency(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: bad magic (expected {expected:?})")]
    BadMagic { path: PathBuf, expected: String },

    #[error("{path}: unsupported format version {version}")]
    BadVersion { path: PathBuf, version: u16 },

    #[error("{path}: truncated file ({detail})")]
    Truncated { path: PathBuf, detail: String },

    #[error("checkpoint spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
