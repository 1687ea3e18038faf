use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input out of domain: {0}")]
    InputDomain(String),

    #[error("simulation diverged at step {step}")]
    SimulationDiverged { step: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("rollout for direction {direction} failed: {source}")]
    Evaluation {
        direction: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid policy file {path}: {msg}")]
    PolicyFile { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Dimension { .. }
            | Error::Parse { .. }
            | Error::PolicyFile { .. }
            | Error::InputDomain(_) => 2,
            _ => 3,
        }
    }
}
