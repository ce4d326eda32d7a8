use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Vec<usize>, actual: Vec<usize> },

    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("malformed image at byte {offset}: {reason}")]
    Ppm { offset: usize, reason: String },

    #[error(transparent)]
    Archive(#[from] ArchiveError),

    #[error("non-finite loss at step {step}")]
    NumericAbort { step: usize },

    #[error("{0}")]
    Invalid(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(expected: &[usize], actual: &[usize]) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures while decoding a coefficient archive. Each variant maps to a
/// distinct integrity condition so callers can report them separately.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArchiveError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported archive version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },

    #[error("truncated archive: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },

    #[error("inconsistent Huffman table: {0}")]
    HuffmanTable(String),

    #[error("corrupt payload: {0}")]
    Corrupt(String),
}
