//! Command-line front end: configuration, replica orchestration, output
//! files and the validation suite. The `accrete` binary is a thin shell
//! over this library.

pub mod analytic_cmd;
pub mod config;
pub mod error;
pub mod output;
pub mod simulate;
pub mod validate;

pub use error::CliError;
