use thiserror::Error;

use crate::kv_cache::SequenceId;

/// A scenario or config value that violates a constraint.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid config at `{path}`: {constraint}")]
pub struct ConfigError {
    /// Dotted key path of the offending value.
    pub path: String,
    pub constraint: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            constraint: constraint.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KvError {
    #[error("need {needed} free blocks, only {free} available")]
    InsufficientBlocks { needed: usize, free: usize },
    #[error("sequence {0} already has a block table")]
    DuplicateSequence(SequenceId),
    #[error("sequence {0} has no block table")]
    UnknownSequence(SequenceId),
}

/// Failures of a simulation run.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The scheduler produced an empty pass while work was pending.
    #[error("scheduler stalled at t={time_us}us with {pending} unfinished requests")]
    Stalled { time_us: u64, pending: usize },
}

/// Failures surfaced by the benchmark harness.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("comparison rejected: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Parse { .. } => 1,
            BenchError::Sim(SimError::Config(_)) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("percentile of an empty sample")]
pub struct EmptySample;
