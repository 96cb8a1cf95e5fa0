//! File formats and the command-line front end of `symfield-core`: numeric
//! CSV tables, JSON model files, TOML/JSON optimiser configs, and one
//! subcommand per pipeline stage.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use artifact::Artifact;
pub use error::{CliError, Result};
pub use table::Table;
