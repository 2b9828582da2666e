use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid descriptor: {0}")]
    Descriptor(String),

    #[error("size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },

    #[error("sample {value} at index {index} exceeds {bit_depth}-bit range")]
    SampleOutOfRange {
        value: i64,
        index: usize,
        bit_depth: u8,
    },

    #[error("unsupported bit depth {0}")]
    UnsupportedBitDepth(u32),

    #[error("invalid dimensions: {0}")]
    Dimensions(String),

    #[error("malformed PGM: {0}")]
    Pgm(String),

    #[error("insufficient support: {0} sample pairs, need at least 2")]
    InsufficientSupport(usize),

    #[error("read past end of stream")]
    EndOfStream,

    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    #[error("invalid mode index {0} for this context")]
    InvalidMode(u32),

    #[error("qp {0} outside [0, 51]")]
    QpOutOfRange(u32),

    #[error("invalid rate-distortion curve: {0}")]
    Curve(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
