//! File formats and commands behind the `crossalign` binary.

pub mod commands;
pub mod output;
pub mod stream;

pub use commands::{AppConfig, CliError};
