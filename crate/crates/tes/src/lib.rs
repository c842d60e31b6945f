//! Command-line front end for tolerance-enforced SDE simulation: run
//! configuration, file formats and the subcommands behind the `tes` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use error::{CliError, CliResult};
