use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected dims {expected:?}, got {actual:?}")]
    DimsMismatch {
        what: &'static str,
        expected: [usize; 3],
        actual: [usize; 3],
    },
    #[error("box {min:?}..={max:?} does not fit grid of dims {dims:?}")]
    OutOfRange {
        min: [usize; 3],
        max: [usize; 3],
        dims: [usize; 3],
    },
    #[error("target dims {target:?} smaller than grid dims {dims:?}")]
    PadTooSmall { target: [usize; 3], dims: [usize; 3] },
    #[error("volume has no object voxels")]
    EmptyObject,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a volume file: bad magic {0:?}")]
    BadMagic([u8; 8]),
    #[error("malformed volume header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: {bytes} bytes is not a whole number of {elem}-byte elements")]
    TruncatedPayload { bytes: usize, elem: usize },
    #[error("payload holds {found} elements, header declares {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("not a checkpoint file: {0}")]
    BadCheckpoint(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("solver did not converge after {iterations} iterations (KKT gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },
    #[error("need both classes present (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },
    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
