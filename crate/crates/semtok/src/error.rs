use std::path::PathBuf;

use crate::manifest::ManifestError;
use crate::npy::NpyError;
use crate::wav::WavError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] semtok_core::Error),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{path}: {source}")]
    Array {
        path: PathBuf,
        #[source]
        source: NpyError,
    },
    #[error("{path}: {source}")]
    Audio {
        path: PathBuf,
        #[source]
        source: WavError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing manifest field `{0}`")]
    MissingField(String),
    #[error("shape mismatch: {what} {left:?} vs {right:?}")]
    Shape {
        what: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
