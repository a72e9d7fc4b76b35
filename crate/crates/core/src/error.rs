use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("timestamps not strictly increasing: {previous} then {next}")]
    NonMonotonicStamp { previous: f64, next: f64 },

    #[error("need at least {required} IMU samples, got {found}")]
    TooFewSamples { required: usize, found: usize },

    #[error("start state stamp {state} is after the first IMU sample {sample}")]
    StartAfterSamples { state: f64, sample: f64 },

    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("only {found} correspondences, need {required}")]
    DegenerateRegistration { found: usize, required: usize },

    #[error("need at least {required} points for covariance estimation, got {found}")]
    NotEnoughPoints { required: usize, found: usize },

    #[error("IMU stream is not static: accel variance {variance} exceeds {threshold}")]
    NotStatic { variance: f64, threshold: f64 },

    #[error("IMU data does not cover the sweep [{start}, {end}]")]
    InsufficientImu { start: f64, end: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no time associations between estimate and ground truth")]
    NoAssociations,

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
