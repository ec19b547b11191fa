//! File formats, inference client, reports and subcommands around `forge-core`.

pub mod client;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod ply;
pub mod report;

pub use error::{ForgeError, Result};
