//! Streaming and batch regression engine for univariate one-step-ahead
//! forecasting of CPU-utilization series.
//!
//! The crate provides:
//! - [`data`]: CSV ingestion, one-minute resampling, lag featurization and a
//!   synthetic workload generator;
//! - [`driftdetect`]: the ADWIN adaptive-windowing change detector;
//! - [`hoeffding`]: incremental regression trees (Hoeffding Tree and its
//!   drift-adaptive variant);
//! - [`ensembles`]: Adaptive Random Forest and Streaming Random Patches;
//! - [`linear`]: online SGD and Passive-Aggressive regressors;
//! - [`batch`]: OLS, CART and random-forest baselines;
//! - [`metrics`]: incremental error metrics and footprint accounting;
//! - [`snapshot`]: versioned model snapshots with deterministic logical sizes.

pub mod batch;
pub mod data;
pub mod driftdetect;
pub mod ensembles;
pub mod error;
pub mod hoeffding;
pub mod linear;
pub mod metrics;
pub mod seeding;
pub mod snapshot;
pub mod stats;

pub use error::{Error, Result};
