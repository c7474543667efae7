//! Experiment runner, reports and replay rendering behind the command-line tool.

pub mod compare;
pub mod config;
pub mod replay;
pub mod run;
pub mod usage_curve;

use thiserror::Error;

pub use compare::{cmd_compare, CompareOptions, CompareReport};
pub use config::{ExperimentConfig, SEED_ENV};
pub use replay::{cmd_replay, Frame, ReplayFormat, ReplayOptions};
pub use run::{cmd_run, read_log, read_trace, read_training_record, RunLogEntry, RunSummary, TraceFile};
pub use usage_curve::{cmd_usage_curve, usage_curve};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{log} has {found} unique final rules, {needed} needed")]
    InsufficientPool { log: String, found: usize, needed: usize },
    #[error("replay diverged: {0}")]
    ReplayDivergence(String),
    #[error("training record has {0} episodes, at least 2 needed")]
    TooFewEpisodes(usize),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("no feasible rule found for any seed")]
    NoFeasibleRule,
}
