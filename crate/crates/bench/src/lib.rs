//! Experiment harness: config files in, CSV plot data and a run manifest out.
//!
//! Output files (all written into the `--out` directory):
//!
//! - `aggregate.csv`: `t,policy,mean_cum_regret_or_ctr,stderr,n`. Synthetic modes report
//!   cumulative pseudo-regret after step `t`; replay reports the running CTR after `t`
//!   log events, carried forward between matches. `n` is the number of seeds averaged.
//! - `runs.csv`: one row per (policy, seed) with the final metric.
//! - `detections.csv`: every restart fired in a synthetic run.
//! - `manifest.toml`: the resolved configuration and every derived seed.
//! - `sweep.csv` (sweep only): `policy,axis,value,mean,stderr,n` over seeds, plus one
//!   `value_<j>/` directory per value holding the files above.
//! - `log_seed<i>.txt` (export-log only): the environment's trajectory as a replay log.

pub mod config;
pub mod experiment;
pub mod output;

use thiserror::Error;

pub use config::{ExperimentConfig, Mode, SweepAxis};
pub use experiment::{export_logs, run_experiment, run_sweep, Overrides};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl BenchError {
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Config(_) => 1,
            BenchError::Runtime(_) => 2,
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(err: std::io::Error) -> Self {
        BenchError::Runtime(err.to_string())
    }
}

impl From<csv::Error> for BenchError {
    fn from(err: csv::Error) -> Self {
        BenchError::Runtime(err.to_string())
    }
}
