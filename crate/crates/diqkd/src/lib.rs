//! Key-rate simulation and optimization for device-independent QKD with
//! heralded single-photon sources.
//!
//! The crate is organized bottom-up: the photonic layer maps hardware
//! parameters to heralded behaviors, the analysis layer extracts Bell
//! scores and entropies, the bound layer certifies conditional entropy
//! against quantum adversaries, and the optimization/finite-key layers
//! turn those into asymptotic and finite-size key rates.

pub mod analysis;
pub mod config;
pub mod entropy;
pub mod error;
pub mod finite_key;
pub mod npa;
pub mod optimize;
pub mod photonic;

pub use error::{Error, Result};
