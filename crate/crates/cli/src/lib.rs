//! Command-line front end for `varpose`: scenario files, runs and sweeps,
//! CSV logs, SVG plots and the acceptance check.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;

pub use commands::{execute, Cli};
pub use config::{load_config, parse_config};
pub use error::CliError;
