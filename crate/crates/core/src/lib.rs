//! Compressed transmission and recovery of IMU signal frames over a noisy
//! channel: power-constrained random sensing, an l1 baseline solver, a small
//! generative recovery model trained from scratch, and the experiment
//! harness that compares them.

pub mod error;
pub mod experiment;
pub mod genmodel;
pub mod lasso;
pub mod metrics;
pub mod rng;
pub mod sensing;
pub mod signals;

pub use error::{Error, Result};
