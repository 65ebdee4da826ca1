//! Learning analog beams and beam codebooks for phased arrays with
//! low-resolution phase shifters and unknown hardware impairments.
//!
//! The crate is organized bottom-up: array geometry and channels, then
//! deterministic beam math, a small neural network library, a per-beam
//! reinforcement learning agent, and the multi-beam codebook pipeline.

pub mod agent;
pub mod array;
pub mod beams;
pub mod channel;
pub mod codebook;
mod codec;
pub mod error;
pub mod experiment;
pub mod neural;

pub use error::{Error, Result};
