//! Speech intelligibility level classification from per-frame log-mel and
//! modulation spectrograms with weighted-pooling LSTM models.

pub mod cli;
pub mod error;
pub mod features;
pub mod harness;
pub mod models;
pub mod nn;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
