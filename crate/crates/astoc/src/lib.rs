//! Experiments, CSV output and the command-line front end for `astoc-core`.

pub mod cli;
pub mod commands;
mod error;
pub mod mc;
pub mod table;

pub use astoc_core as core;
pub use error::{CliError, CliResult};
