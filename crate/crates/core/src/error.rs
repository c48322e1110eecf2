use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scan: {0}")]
    MalformedScan(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("degenerate scan: {0}")]
    DegenerateScan(&'static str),

    #[error("degenerate registration: only {found} correspondences (need 3)")]
    DegenerateRegistration { found: usize },

    #[error("no patch: pixel lies outside the image")]
    NoPatch,

    #[error("empty depth map for frame {frame}: no point projects into the image")]
    EmptyDepthmap { frame: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
