use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation before any computation started.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("qubit index {index} out of range for {num_qubits}-qubit state")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("{requested} qubits exceeds the simulator capacity of {cap}")]
    CapacityExceeded { requested: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("postselection on a branch with probability {probability:e}")]
    ZeroProbabilityBranch { probability: f64 },

    #[error("oracle promise violated: Deutsch-Jozsa requires a constant or balanced oracle")]
    PromiseViolated,

    #[error("no members accepted into the ensemble")]
    EmptyEnsemble,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures that come out of a computation rather than from bad input.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            Error::ZeroProbabilityBranch { .. }
                | Error::EmptyEnsemble
                | Error::Io { .. }
                | Error::Csv { .. }
        )
    }
}
