//! Command-line driver: configuration, artifact formats and commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use commands::{run, Check, Command, Context, Report};
pub use config::RunConfig;
pub use error::{CliError, CliResult, ConfigError};
