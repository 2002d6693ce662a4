//! Dataset popularity prediction and replica placement for grid storage.
//!
//! The library is organized around a weekly access trace:
//!
//! - [`trace`]: the data model, CSV import/export, and a seeded synthetic
//!   generator.
//! - [`features`]: per-dataset feature vectors over a feature window and
//!   popularity labels over a label window.
//! - [`forest`]: a from-scratch random-forest classifier for long-term
//!   access probability, with impurity-based feature importances.
//! - [`smoothing`]: Brown's simple exponential smoothing for short-term
//!   access-count forecasts, plus static and average baselines.
//! - [`strategy`]: the replication engine — the forecast-per-replica metric,
//!   greedy replica removal/addition, LRU/LFU baseline rankings, the
//!   long-term purge, and a week-by-week simulator.
//! - [`evaluate`]: rolling-window evaluation — saved-space-vs-mistakes
//!   curves, walk-forward forecast correlation, and the occupied-space CDF.
//! - [`config`]: run configuration with a stable digest for reproducible
//!   outputs.

pub mod config;
pub mod evaluate;
pub mod features;
pub mod forest;
pub mod smoothing;
pub mod strategy;
pub mod trace;
