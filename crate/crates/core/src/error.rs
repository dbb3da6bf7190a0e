use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DsaError {
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("action norm {norm} exceeds a_max {a_max}")]
    ActionOutOfBounds { norm: f64, a_max: f64 },

    #[error("agents occupy the same position; pairwise barrier undefined")]
    CoincidentAgents,

    #[error("pair distance {distance} is not above d_min {d_min}; Lie derivative undefined")]
    InsideCollisionRadius { distance: f64, d_min: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("simulation aborted at step {step}, agent {agent}: {reason}")]
    Aborted {
        step: usize,
        agent: usize,
        reason: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = DsaError> = std::result::Result<T, E>;

impl DsaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DsaError::InvalidScenario(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DsaError::Io {
            path: path.into(),
            source,
        }
    }
}
