//! Command-line driver for `lensrig-core`: configuration, subcommands and
//! report export.

// `!(v > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command};
pub use config::{Overrides, RunConfig};
pub use error::CliError;
pub use output::Report;
