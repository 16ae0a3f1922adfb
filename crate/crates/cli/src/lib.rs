//! Command-line front end: argument and config-file resolution, CSV input,
//! and JSON/CSV artifacts with a provenance header.

pub mod args;
pub mod commands;
pub mod config;
pub mod input;
pub mod output;

use anyhow::Result;

pub use args::Cli;
pub use config::{resolve, RunConfig};

/// Resolve `cli` and run it.
pub fn run(cli: Cli) -> Result<()> {
    let config = resolve(cli)?;
    commands::execute(&config)
}
