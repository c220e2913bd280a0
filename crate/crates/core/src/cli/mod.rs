//! Command-line front end: config parsing, session run, output files.

mod config;
mod run;

pub use config::{load_config_file, parse_config, CliArgs, ConfigError, RunConfig};
pub use run::{main_with_args, run, write_mode_csv, RunError, RunSummary};
