//! Configuration-driven runner for the `dirform` experiments.

pub mod build;
pub mod config;
pub mod defs;
pub mod emit;
pub mod error;
pub mod run;

pub use config::{parse_config, parse_config_with, Command, ConfigError, ExperimentConfig, Overrides};
pub use emit::{render, render_line, summary, Header, Record, Table};
pub use error::CliError;
pub use run::{run, Output};
