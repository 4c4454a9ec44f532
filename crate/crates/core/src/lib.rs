//! Root-cause triage for prediction anomalies by global feature importance shift.
//!
//! Per-example feature importances come from feature ablation against a frozen
//! scoring model. They are aggregated per window into a coverage-weighted
//! median, and features are ranked by how much that aggregate moved between a
//! control window and an anomalous one.

pub mod aggregation;
pub mod attribution;
pub mod bench;
pub mod error;
pub mod feature_space;
pub mod mfc;
pub mod model;
pub mod monitor;
pub mod report;

pub use error::{Error, Result};
