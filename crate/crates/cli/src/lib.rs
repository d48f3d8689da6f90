//! Command-line front end for the V2V URLLC simulator: TOML experiment
//! files, presets, JSON reports and CSV traces.

pub mod commands;
pub mod config;
pub mod error;
pub mod preset;
pub mod report;

pub use config::ConfigFile;
pub use error::{exit, CliError, CliResult};
