//! Hybrid artifact detection for minute-resolution mean blood pressure.
//!
//! A statistical flatline detector is OR-fused with a reconstruction-error
//! spike detector backed by an LSTM autoencoder, an LSTM beta-VAE, or a
//! per-window ARIMA forecaster. The crate also carries the full
//! tune/train/calibrate/evaluate protocol and a seeded synthetic data
//! generator.

pub mod arima;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod flatline;
pub mod fusion;
pub mod io;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod prng;
pub mod signal;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
