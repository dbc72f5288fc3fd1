use std::path::PathBuf;

use crate::decompose::DecomposeConfig;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("structure-to-texture ratio is infinite (texture has zero energy)")]
    InfiniteRatio,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("STR tuning failed: {reason} (best STR {best_str_db:.3} dB)")]
    TuningFailed {
        reason: String,
        best_str_db: f64,
        best: Box<DecomposeConfig>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("decode error: {0}")]
    Decode(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
