//! Experiment harness around `ttcirc-core`: seeded configs in, stamped CSV
//! and JSON artifacts out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{Command, ExperimentConfig, Overrides};
pub use error::{CliError, Result};
