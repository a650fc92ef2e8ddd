//! Experiment runner for the safe policy-gradient learners: TOML configs,
//! seeded substreams, metrics CSV, evaluation and the acceptance suite.

pub mod acceptance;
pub mod checkpoint;
pub mod config;
mod error;
pub mod evaluate;
pub mod metrics;
pub mod runner;
pub mod seeds;

pub use checkpoint::Checkpoint;
pub use config::{Algorithm, ExperimentConfig, Family};
pub use error::{HarnessError, Result};
pub use evaluate::{evaluate_policy, EvalSummary};
pub use metrics::{MetricsRow, MetricsWriter};
pub use runner::{run_experiment, train, RunOutcome};
