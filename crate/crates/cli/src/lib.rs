//! Front end of the `ioncollect` command: run configuration and the
//! subcommands that write reports into an output directory.

pub mod commands;
pub mod config;
