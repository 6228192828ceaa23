//! Seeded Monte Carlo harness: estimates moments, deviation tails and
//! running-max trajectories of `W_p^p(mu_n, mu)` across `n`, fits log-log
//! slopes, and renders verdicts against the theory predictions.

mod config;
mod estimator;
mod report;
mod runner;

pub use config::{
    config_from_toml, ConfigStatistic, EstimatorKind, ExperimentConfig, NormalizationKind,
    SolverConfig,
};
pub use estimator::lane_seed;
pub use report::{fit_loglog_slope, verdict, PerN, RateReport, RuntimeMeta, Verdict};
pub use runner::{
    run_deviation_tail, run_moment_rate, run_running_max, DeviationCell, DeviationReport,
    PerXFit, RawValues, TrajectoryDiag, TrajectoryReport,
};

use thiserror::Error;

use crate::measures::MeasureError;
use crate::multiscale::MultiscaleError;
use crate::theory::TheoryError;
use crate::transport::TransportError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("measure `{spec}` lacks a required moment: {what}")]
    DivergentMoment { spec: String, what: String },
    #[error(
        "underpowered deviation config: expected exceedances fall below 10 at the largest n; \
         need at least K = {minimal_k} replicates (have {have})"
    )]
    Underpowered { minimal_k: u64, have: u64 },
    #[error("slope fit: {0}")]
    FitDomain(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Multiscale(#[from] MultiscaleError),
}
