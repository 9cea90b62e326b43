//! Config-driven verification harness for the `skipfree` library.
//!
//! Subcommands are exposed as functions so they can be driven without a
//! process boundary; `main.rs` only parses flags and maps exit codes.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{cmd_identities, cmd_simulate, cmd_verify, Outcome};
pub use config::{
    load_config, parse_config, Format, OracleHorizon, Overrides, RunConfig, Settings, Workers,
};
pub use error::CliError;
