//! Experiment driver for the `mns` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod record;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use record::{EncodingFile, ResultRecord};
