use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of parameters, features or labels disagree with a [`ModelSpec`](crate::model::ModelSpec).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A non-finite loss showed up during SGD.
    #[error("training diverged in epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: bad IDX magic number {found:#010x}, expected {expected:#010x}")]
    IdxMagic { path: PathBuf, found: u32, expected: u32 },

    #[error("{path}: IDX file truncated, expected {expected} bytes but found {found}")]
    IdxTruncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("IDX count mismatch: {images} images but {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    /// Wraps a failure with the federated round (and phase) it happened in.
    #[error("{phase} round {round}: {source}")]
    InRound {
        phase: String,
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn in_round(self, phase: &str, round: usize) -> Self {
        Error::InRound {
            phase: phase.to_string(),
            round,
            source: Box::new(self),
        }
    }

    /// True when the failure stems from user-supplied settings rather than
    /// from the computation itself.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::InRound { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
