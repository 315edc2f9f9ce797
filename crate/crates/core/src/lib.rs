//! Sleep staging from photoplethysmography.
//!
//! The pipeline runs in stages:
//!
//! - [`sigprep`] turns a raw recording into a grid of normalized 30 s windows
//!   (1024 samples each).
//! - [`superwin`] arranges window grids into model inputs (configurations
//!   `c01` to `c05`).
//! - [`tensorcore`] is a small reverse-mode tensor engine with exactly the
//!   primitives the staging network needs.
//! - [`model`] assembles the network: residual feature extraction per
//!   window, dilated temporal context across windows, a 4-class classifier.
//! - [`traineval`] handles label merging, subject-level folds, masked
//!   training and the metric suite.
//! - [`datagen`] synthesizes labeled PPG-like recordings.
//! - [`cliio`] holds the on-disk formats and the command implementations.

pub mod cliio;
pub mod datagen;
pub mod error;
pub mod model;
pub mod sigprep;
pub mod superwin;
pub mod tensorcore;
pub mod traineval;

pub use error::{Error, Result};

/// Samples per 30 s window after resampling.
pub const WINDOW_SAMPLES: usize = 1024;

/// Window duration in seconds (one scoring epoch).
pub const EPOCH_SECONDS: f64 = 30.0;

/// Number of merged sleep-stage classes.
pub const NUM_CLASSES: usize = 4;
