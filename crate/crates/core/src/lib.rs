//! Flight delay prediction from on-time performance data.
//!
//! The crate covers the whole offline and serving pipeline:
//!
//! - [`ingest`]: CSV parsing, label cleaning, hourly interpolation, train/test
//!   split and a seeded synthetic data generator.
//! - [`features`]: feature selection, delay labels, label / one-hot encoding
//!   and standardization.
//! - [`numerics`]: least squares, linear prediction and evaluation metrics.
//! - [`carrier_origin`], [`seasonal`], [`mlp`]: the three predictors.
//! - [`predictor`]: a common front for the three predictors.
//! - [`request`]: turning user-facing flight descriptions into model queries.
//! - [`store`]: model files, the user flight list and the prediction event log.
//! - [`dialog`]: the slot-filling conversation engine.
//! - [`training`]: training the predictors and writing a model directory.

pub mod airports;
pub mod carrier_origin;
pub mod dialog;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod mlp;
pub mod numerics;
pub mod predictor;
pub mod request;
pub mod seasonal;
pub mod store;
pub mod training;

pub use error::{Error, Result};

/// Minutes beyond the schedule after which a flight counts as delayed.
pub const DELAY_THRESHOLD_MINUTES: f64 = 15.0;

/// Seed used wherever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 42;
