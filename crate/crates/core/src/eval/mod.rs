//! Controller evaluation: orientation error, stability, temporal
//! consistency and effort over seeded trials, plus timing and charts.

mod metrics;
mod plot;
mod run;

use thiserror::Error;

pub use metrics::{
    activation_deltas, mean_std, metric_correctness, metric_efficiency, metric_stability, metric_temporal, sample_distances, MeanStd,
};
pub use plot::{plot_csvs, plot_learning_curve, plot_reports};
pub use run::{
    run_eval, run_trial, timing_benchmark, trial_targets, Controller, MetricsReport, TimingReport, TrialConfig, TrialMetrics, TrialRecord,
    REPORT_HEADER,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{what}: need at least {need} samples, got {got}")]
    TooFewSamples { what: &'static str, need: usize, got: usize },
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error("controller does not fit the model: {0}")]
    ModelMismatch(String),
    #[error("metrics are not finite")]
    NonFinite,
    #[error(transparent)]
    Fdat(#[from] crate::fdat::FdatError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("plot: {0}")]
    Plot(String),
}
