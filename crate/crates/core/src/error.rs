use thiserror::Error;

/// Errors raised by the simulation, learning and serialization layers.
#[derive(Debug, Error)]
pub enum ApexError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("simulation diverged at joint {joint}")]
    SimulationDiverged { joint: usize },

    #[error("non-finite numeric value: {0}")]
    Numeric(String),

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ApexError>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(ApexError::Dimension {
            context,
            expected,
            actual,
        })
    }
}
