//! Command-line front end for the MREE market simulator.
//!
//! [`manifest`] turns layered settings into a validated [`RunManifest`];
//! [`commands`] implements the `run`, `sweep`, `replay` and `case-study`
//! subcommands on top of `mree-core`.

pub mod commands;
pub mod error;
pub mod manifest;

pub use error::CliError;
pub use manifest::{Cell, RunManifest, Settings};
