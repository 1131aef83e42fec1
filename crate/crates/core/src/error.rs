use std::io;

use thiserror::Error;

/// Errors produced anywhere in the skill-learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate quaternion (norm {norm:e})")]
    DegenerateQuaternion { norm: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("labeled dataset contains a single class")]
    SingleClassDataset,

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    DivergenceDetected { epoch: usize, loss: f64 },

    #[error("demonstration did not reach an acceptable state within {max_steps} steps")]
    EpisodeDiverged { max_steps: usize },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit status: 1 validation/config, 2 divergence, 3 I/O or corrupt files.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DivergenceDetected { .. } | Error::EpisodeDiverged { .. } => 2,
            Error::Io(_) | Error::Corrupt(_) | Error::ChecksumMismatch { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
