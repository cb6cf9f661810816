//! Adaptive neighborhood encoding for temporal interaction graphs.
//!
//! The crate provides, from the ground up: an event-stream graph store
//! with time-respecting queries, a reverse-mode autodiff core in 64-bit
//! arithmetic, an occurrence-aware neighbor selector with a diversity
//! penalty, a temporal-aware LSTM aggregator with learned route pruning
//! and outdated decay, and the training/evaluation harnesses around them.

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod nn;
pub mod params;
pub mod tape;
pub mod tensor;

pub use error::{Result, SeanError};
pub use tensor::Tensor;
