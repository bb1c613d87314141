//! Configuration files, command dispatch and report output for the
//! `switchdiff` binary.

pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, parse_config_for, serialize_config, Command, CommandName, ConfigError, Format, RunSpec};
pub use report::{Report, ReportRow};
pub use run::{run, RunError, RunOptions, RunOutcome};
