use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("cannot encode {path}: {reason}")]
    Encode { path: PathBuf, reason: String },

    #[error("image is {width}x{height}, both dimensions must be at least 3")]
    TooSmall { width: usize, height: usize },

    #[error("raster dimensions must be non-zero")]
    ZeroDimension,

    #[error("buffer of length {actual} does not match {width}x{height} (expected {expected})")]
    BufferLength {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },

    #[error("mask value {0} at index {1} is not 0 or 1")]
    NonBinary(u8, usize),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("sigma must be non-negative, got {0}")]
    NegativeSigma(f64),

    #[error("segment count must be at least 1")]
    ZeroSegments,

    #[error("requested {segments} segments for only {pixels} pixels")]
    TooManySegments { segments: usize, pixels: usize },

    #[error("pixel ({x}, {y}) is on the border; gradient needs an interior pixel")]
    BorderPixel { x: usize, y: usize },

    #[error("no cluster centers")]
    NoCenters,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("downsampling factor must be at least 1")]
    ZeroFactor,

    #[error("label {0} does not occur in the labeling")]
    UnknownLabel(u32),

    #[error("no superpixel overlaps the guidance mask")]
    NoGuidanceSignal,

    #[error("mask is empty")]
    EmptyMask,

    #[error("both masks are empty")]
    BothEmpty,

    #[error("at least two groups are required, got {0}")]
    TooFewGroups(usize),

    #[error("group {0} is empty")]
    EmptyGroup(usize),

    #[error("at least three observations are required, got {0}")]
    TooFewObservations(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
