//! Experiment machinery: seeded dataset splits, an early-stopped training
//! loop, chance-corrected agreement metrics, report serialization, and the
//! five hypothesis drivers (domain shift, motion sensitivity, data volume,
//! sample dilution, reported-rate invariance).

mod hypotheses;
mod metrics;
mod report;
mod split;
mod training;

pub use hypotheses::{
    desk_model, run_h1, run_h2, run_h3, run_h4, run_h5, run_hypothesis_suite, ArmStats,
    HypothesisConfig, HypothesisInput, HypothesisReport,
};
pub use metrics::{cohen_kappa, Confusion, Metrics};
pub use report::{
    ci95, intervals_overlap, mean, metrics_csv, rows_from_trial, write_kv_report,
    write_metrics_csv, MetricsRow, METRICS_CSV_HEADER,
};
pub use split::{kfold_domains, split_dataset, SplitIndices, SplitSpec};
pub use training::{
    evaluate, train_with_early_stopping, EarlyStopping, EpochRecord, LabeledSet, StopDecision,
    TrainConfig, TrialResult, TrialStatus,
};

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("too few domains: {0}")]
    TooFewDomains(String),
    #[error("degenerate marginals: {0}")]
    DegenerateMarginals(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("report i/o: {0}")]
    Io(#[from] std::io::Error),
}
