//! Command-line front end: collection files and subcommands.

pub mod commands;
pub mod format;

pub use commands::{run, Cli, CliError};
pub use format::{CollectionFile, FormatError};
