//! Passive 5G PSS synchronization for backscatter tags: NR downlink
//! waveform synthesis, envelope front ends, symmetric detectors and their
//! 1-bit variants, hardware cost models and an experiment harness.

pub mod active;
pub mod detect;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod io;
pub mod resources;
pub mod waveform;

pub use error::{Error, Result};
