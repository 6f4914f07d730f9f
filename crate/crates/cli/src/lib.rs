//! Experiment harness for the CGMC lattice simulator: config parsing,
//! seed management, parallel realization scheduling and CSV/JSON
//! artifact emission.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod manifest;
pub mod runner;

pub use commands::{CliError, Overrides};
pub use config::{ExperimentConfig, InitialState};
pub use manifest::RunManifest;
