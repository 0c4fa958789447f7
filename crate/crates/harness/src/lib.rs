//! Seeded experiment runner for the sampling-consensus defense.
//!
//! Each experiment takes an [`ExperimentSpec`], fans repeats out over a
//! rayon pool (every repeat owns its RNG substreams, results are collected
//! in index order) and returns a [`Report`]: tables with closed-form columns
//! beside the empirical ones, plus named pass/fail checks.

pub mod common;
pub mod experiments;
pub mod report;
pub mod spec;

use thiserror::Error;

pub use experiments::{
    run_ablation_epsilon, run_calibrate, run_estimation, run_modes, run_tradeoff, run_validate_bounds, Experiment,
};
pub use report::{Check, OutputFormat, Report, Table};
pub use spec::{EngineSettings, ExperimentSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Engine(#[from] robosac_core::EngineError),
    #[error(transparent)]
    Sim(#[from] robosac_core::sim::SimError),
    #[error(transparent)]
    Sampling(#[from] robosac_core::SamplingError),
}
