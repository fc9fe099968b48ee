//! Configuration, persistence and subcommands of the `vesicle` binary.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod snapshot;

pub use config::{Resolved, RunConfig};
pub use error::{Result, ShellError};
