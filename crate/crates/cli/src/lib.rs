//! Experiment harness for the multi-round matching engine: dataset sweeps,
//! CSV artifacts and replay of the worked examples.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod fixtures;

pub use config::{Algorithm, ExperimentConfig, SpecName};
pub use experiment::{run_dataset, run_experiment, DatasetRuns, ExperimentReport};
pub use fixtures::{run_fixture_suite, FixtureOutcome};
