use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid image dimensions {width}x{height}x{channels}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("invalid channel count {0} (expected 1 or 3)")]
    InvalidChannelCount(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid patch size {0} (must be odd and >= 3)")]
    InvalidPatchSize(usize),
    #[error("patch size {size} too large for a {width}x{height} image")]
    PatchTooLarge {
        size: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need at least {needed} images, got {got}")]
    TooFewImages { needed: usize, got: usize },
    #[error("image {width}x{height} is smaller than the {min}x{min} minimum")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("ray has no samples")]
    EmptyRay,
    #[error("invalid ray samples: {0}")]
    InvalidRay(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("no scene under {0} contains a PNG image")]
    EmptyDataset(PathBuf),
    #[error("not a directory: {0}")]
    NotADirectory(PathBuf),
    #[error("usage: {0}")]
    Usage(String),
    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
