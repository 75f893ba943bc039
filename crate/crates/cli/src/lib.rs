//! Experiment runner for `saproj-core`.
//!
//! Reads TOML experiment descriptions, runs them, writes traces, summaries,
//! plot data and hypothesis reports, and replays traces to confirm that runs
//! are bit-for-bit reproducible.

pub mod artifacts;
pub mod config;
pub mod demos;
pub mod experiment;
pub mod reports;
pub mod setup;

pub use config::{parse_config, serialize_config, ExperimentConfig};
pub use experiment::{replay, run_experiment, CliError, Overrides};
