//! Command-line front end: JSON run configs in, CSV and JSON results out.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Cli};
pub use config::RunConfig;
pub use error::CliError;
