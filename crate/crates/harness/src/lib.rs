//! Experiment harness for comparing random-forest kernel SVMs with their
//! baselines.
//!
//! A run evaluates each configured method on each dataset over repeated
//! stratified half-splits. Hyperparameters are chosen per split by grid
//! search with stratified cross-validation. The per-dataset accuracies are
//! then summarized with average ranks, the Friedman/Nemenyi test and
//! pairwise Bayesian sign tests, globally and per HDLSS band.

pub mod config;
pub mod error;
pub mod methods;
pub mod metrics;
pub mod output;
pub mod report;
pub mod runner;
pub mod tune;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use methods::{Method, Params};
pub use report::{assemble_report, ComparisonReport};
pub use runner::{run_experiment, run_method_on_dataset, ExperimentResults, MethodResult};
pub use tune::tune_and_fit;

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "RFSVM_WORKERS";

/// Sizes the global rayon pool from [`WORKERS_ENV`] if it is set.
pub fn configure_workers() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HarnessError::Config(format!("{WORKERS_ENV}={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| HarnessError::Config(format!("cannot size worker pool: {e}")))?;
    Ok(Some(n))
}
