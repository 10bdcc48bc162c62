use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("zero-length vector")]
    ZeroVector,
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(u64),
    #[error("crop holds {found} points, need at least {required}")]
    EmptyCrop { found: usize, required: usize },
    #[error("lost track: {0}")]
    LostTrack(String),
    #[error("length mismatch: {0} estimates vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("unsupported format version {found:?}, expected {expected:?}")]
    FormatVersionMismatch { expected: String, found: String },
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
