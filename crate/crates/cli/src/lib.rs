//! Configuration parsing and protocol dispatch behind the `spinmech` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, read_config, ConfigError, Format, Overrides, Protocol, RunConfig};
pub use run::{dispatch, validate, Outcome, RunError};
