//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("jitter trace does not cover the image: {0}")]
    InconsistentTrace(String),

    #[error(
        "stripe spacing/width draw rejected {attempts} times without satisfying non-inversion"
    )]
    JitterRejected { attempts: u32 },

    #[error("image {w}x{h} is smaller than the supported minimum {min}x{min}")]
    ImageTooSmall { w: usize, h: usize, min: usize },

    #[error("no decodable images found in {0}")]
    EmptyCorpus(PathBuf),

    #[error("config error: {0}")]
    Config(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("distance map contains a negative value at index {index}")]
    NegativeDistance { index: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    /// Pairs an io::Error with the path it came from.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Pairs an image codec error with the offending path.
    pub fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }
}
