use std::path::PathBuf;

use crate::pose::IterationRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("duplicate vertex at ({x}, {y})")]
    Duplicate { x: f64, y: f64 },

    #[error("point ({x}, {y}) lies outside the triangulation hull")]
    OutsideHull { x: f64, y: f64 },

    #[error("point is behind the camera (z_cam = {z})")]
    BehindCamera { z: f64 },

    #[error("insufficient data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("robust estimation failed: {0}")]
    RobustFailure(String),

    #[error("inconsistent homography: {0}")]
    InconsistentHomography(String),

    #[error("pose refinement diverged after {} iterations", trace.len())]
    Divergence { trace: Vec<IterationRecord> },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
