//! File formats, run configuration and subcommands for `hydragan-core`.
//!
//! Exit codes: 0 success, 1 output IO failure, 2 configuration or usage
//! error, 3 bad input data or checkpoint, 4 numeric divergence in training.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod trainlog;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
