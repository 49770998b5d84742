//! Conditional Wasserstein GANs for sampling posteriors of PDE-based
//! Bayesian inverse problems.
//!
//! The crate covers the whole pipeline: prior samplers and forward solvers
//! that manufacture `(field, measurement)` pairs, a small reverse-mode
//! autodiff engine with double backprop, the U-Net generator with
//! conditional instance normalization and its critic, gradient-penalty
//! training, posterior statistics, and locality probes.

pub mod autograd;
pub mod cli;
pub mod data;
pub mod nn;
pub mod pde;
pub mod posterior;
pub mod probes;
pub mod error;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
