//! Zero-shot condition monitoring for rotating machinery.
//!
//! A beta-VAE is trained on normal and degraded vibration windows only. The
//! distance of a window's latent mean from the normal-condition reference
//! point is its health index; thresholds fitted on the training data turn
//! the index into a three-way classification that also flags severe faults
//! never seen during training.

pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod health;
pub mod nn;
pub mod rng;
pub mod vae;

pub use error::{Error, Result};
