//! Experiment runner: reads a unit-suffixed TOML configuration, runs one
//! experiment family and writes CSV/JSON outputs with a digest manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run_experiment, Experiment, Run};
pub use config::ExperimentConfig;
pub use error::CliError;
pub use output::{RunManifest, MANIFEST};
