//! Long-term popularity prediction with a stacked LSTM and an input-weighted
//! attention head.
//!
//! This crate holds the numerical core and is `no_std` (it needs `alloc`).
//! File formats, ingestion from disk and the command line live in the `dlam`
//! crate.

#![no_std]

extern crate alloc;

pub mod attention;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linear;
pub mod lstm;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod params;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use model::{DlamModel, ModelConfig, Transform, Variant};
pub use numerics::{DenseMatrix, DenseVector, Rng};
pub use params::Parameters;
