//! Command-line experiments over `vekua-core`: configuration, report
//! writing, and the experiment suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{run, BergmanOp, Command, Example, Outcome};
pub use config::{parse_run_config, CoefficientPreset, FPreset, Overrides, RunConfig};
pub use error::CliError;
pub use report::Report;
