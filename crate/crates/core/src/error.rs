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
    #[error("malformed netpbm header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("wrong .flo magic in {path}: {found}")]
    WrongMagic { path: PathBuf, found: f32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("frame count mismatch: expected {expected}, found {found}")]
    FrameCountMismatch { expected: usize, found: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("invalid synthetic sequence: {0}")]
    InvalidSynth(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate propagation: the propagated mask is identically zero (empty graph or zero mask)")]
    DegeneratePropagation,
    #[error("constant mask: zero range, cannot rescale to [0,1]")]
    ZeroRange,
    #[error("matrix of size {n} exceeds the dense size cap {cap}")]
    SizeCap { n: usize, cap: usize },
    #[error("linear system is singular or not positive definite")]
    Singular,
    #[error("power iteration did not converge after {iterations} iterations (last direction change {last_change:e}); the dominant eigenvalue may be complex")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("power iteration produced a zero vector")]
    ZeroUpdate,
    #[error("empty input: {0}")]
    Empty(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
