//! Command-line front end: config parsing and run execution.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_for, Mode, RunConfig};
pub use run::{execute, RunError, RunOutput};
