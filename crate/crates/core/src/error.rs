use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inclination {0} deg is outside [0, 180]")]
    InclinationOutOfRange(f64),

    #[error("non-finite angle in direction")]
    NonFiniteAngle,

    #[error("insufficient sensors: {sensors} sensors cannot resolve order {order} ({needed} required)")]
    InsufficientSensors {
        sensors: usize,
        order: usize,
        needed: usize,
    },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("failed to parse {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signal has {samples} samples, shorter than one {frame_len}-sample frame")]
    SignalTooShort { samples: usize, frame_len: usize },

    #[error("encoding matrix is rank deficient (condition number {0:.3e})")]
    RankDeficient(f64),

    #[error("signal has {signal} channels but the geometry has {sensors} sensors")]
    ChannelMismatch { signal: usize, sensors: usize },

    #[error("eigen-decomposition failed: covariance has non-finite entries")]
    EigenFailure,

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
}
