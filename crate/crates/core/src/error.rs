use std::path::PathBuf;

use thiserror::Error;

use crate::dynamics::RobotState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate physical parameters: {0}")]
    DegenerateParams(String),

    #[error("integration diverged at t={:.6}: {state:?}", state.t)]
    IntegrationDiverged { state: RobotState },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] ModelFormatError),

    #[error("malformed trajectory file: {0}")]
    TrajectoryFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Failures when decoding a persisted policy model.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelFormatError {
    #[error("not a policy model file (bad magic)")]
    BadMagic,
    #[error("unsupported model version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("inconsistent shape header: {0}")]
    ShapeInconsistency(String),
    #[error("truncated model file: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("non-finite parameter at index {0}")]
    NonFinite(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
