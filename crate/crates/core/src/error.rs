//! Crate-wide error type for data-level failures.
//!
//! Programming errors (shape mismatches, consumed tapes, time-travel
//! deltas) panic instead; see the individual modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeanError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("node id {node} out of range (num_nodes = {num_nodes})")]
    NodeOutOfRange { node: usize, num_nodes: usize },

    #[error("empty graph")]
    EmptyGraph,

    #[error("metric needs at least one positive example")]
    NoPositives,

    #[error("metric needs both classes present")]
    SingleClass,

    #[error("dataset carries no dynamic labels")]
    NoLabels,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SeanError>;
