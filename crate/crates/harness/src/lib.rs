//! Configuration-driven experiment runner for `sram-mcmc`.
//!
//! An [`ExperimentConfig`] names a model, chain, datapath and a set of sweep
//! axes. [`run_sweep`] expands the axes into points, runs every
//! (point, replicate) pair concurrently and streams one CSV row per pair in
//! a fixed order.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

pub use config::{ExperimentConfig, SeedPolicy, SweepPoint};
pub use error::{HarnessError, Result};
pub use sweep::{run_point, run_sweep, summarize, Metrics, SweepRow};
