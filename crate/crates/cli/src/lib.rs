//! File formats, configuration and subcommands behind the `tensegrity`
//! binary. Configs are TOML, tables are CSV and plots are SVG.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod plot;

pub use config::ExperimentConfig;
pub use error::{exit, CliError, CliResult};
