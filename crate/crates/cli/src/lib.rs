//! Std companion to `qwm-core`: file formats, experiment configuration,
//! the batch harness and the `qwm` command line.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;

pub use error::{CliError, CliResult};
