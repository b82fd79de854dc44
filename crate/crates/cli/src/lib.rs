//! Scenario runner and command-line front end for `hetnoise-core`.

pub mod bundled;
pub mod cli;
pub mod error;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::{exit, CliError};
pub use report::{emit_report, parse_report, Format};
pub use runner::{run_scenario, ExpectationOutcome, RunReport};
pub use scenario::{load_scenario, parse_scenario, Experiment, Scenario};
