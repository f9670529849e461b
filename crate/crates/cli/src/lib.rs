//! Scenario files, built-in examples, reports and plot data for
//! `viabilitykit-core`.

pub mod builtins;
pub mod commands;
pub mod output;
pub mod report;
pub mod scenario;

pub use commands::{CliError, Overrides};
pub use report::Report;
pub use scenario::{CheckName, Scenario, ScenarioError};
