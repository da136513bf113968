//! Verification toolkit for random circuit sampling experiments.
//!
//! The crate generates grid random circuits, simulates them exactly,
//! produces noisy samples under explicit noise mechanisms, and evaluates
//! fidelity with the linear cross-entropy estimator, the component-product
//! fidelity prediction and a Fourier–Walsh level decomposition.

pub mod calibration;
pub mod circuit;
pub mod dataio;
pub mod error;
pub mod estimators;
pub mod layout;
pub mod noise;
pub mod optimize;
pub mod protocol;
pub mod rng;
pub mod samples;
pub mod simulator;
pub mod spectral;

pub use error::{Error, Result};
