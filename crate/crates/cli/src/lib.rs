//! Experiment driver for the dephasing-probe chaos diagnostics.
//!
//! A run is described by a JSON [`config::RunConfig`]; [`experiments`]
//! executes it on a rayon pool and [`output`] writes CSV tables plus a
//! manifest that can be fed back in to repeat the run.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod stats;

pub use config::RunConfig;
pub use error::{CliError, Result};
