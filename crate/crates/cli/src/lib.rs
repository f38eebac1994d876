//! Configuration, experiment drivers and artifact formats behind the
//! `nematic` binary.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::{cmd_converge, cmd_run, cmd_sweep, cmd_verify, Axis, CliError};
pub use config::{parse_config, ConfigError, RunConfig};
