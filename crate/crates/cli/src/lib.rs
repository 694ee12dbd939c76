//! Scenario loading, the plan / simulate / verify pipeline, sweeps and
//! report tables behind the `fdip` command.

pub mod commands;
pub mod error;
pub mod report;
pub mod scenario;
pub mod sweep;

pub use error::{CliError, CliResult};
