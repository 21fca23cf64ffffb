//! Command line front end: problem files, reports and subcommands.

pub mod commands;
pub mod problem;
pub mod report;

pub use commands::{run, Cli, Outcome, EXIT_USAGE};
pub use problem::{ParseError, ProblemFile};
pub use report::ReportFile;
