//! Command-line experiments and validation suites for the `dppm` crate.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod validate;

pub use cli::run;
pub use error::{CliError, CliResult};
