//! Experiment drivers and report writers for the `lanecheck` binary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use experiments::Outcome;
