//! Scenario driver for the waveguide-mode qubit simulator: layered
//! configuration, a registry of named scenarios, sweeps and report output.

pub mod config;
pub mod data;
pub mod error;
pub mod plot;
pub mod report;
pub mod scenario;
pub mod scenarios;

pub use config::{resolve, Overrides, ScenarioConfig};
pub use error::CliError;
pub use report::{Outcome, RunReport};
pub use scenario::{execute, run_scenario, Execution, Registry, RunContext, Scenario};
