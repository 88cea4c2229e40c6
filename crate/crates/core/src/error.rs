use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("raw data size mismatch: header declares {expected} voxels, file holds {actual} bytes")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("voxel index ({ix}, {iy}, {iz}) out of range")]
    IndexOutOfRange { ix: usize, iy: usize, iz: usize },

    #[error("position outside the volume: ({0:.6}, {1:.6}, {2:.6}) mm")]
    OutsideVolume(f64, f64, f64),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),

    #[error("no surface detected in B-scan {0}")]
    NoSurface(usize),

    #[error("point outside the invertible region of the distortion map")]
    NotInvertible,

    #[error("no needle evidence: the best cluster has zero votes")]
    NoNeedleEvidence,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no sphere candidate reached the minimum support of {0} inliers")]
    NoConsensus(usize),

    #[error("unknown method '{0}' (expected SVDT, QT or QKT)")]
    UnknownMethod(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pose {index}: {source}")]
    Pose {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
