//! Cross-validation, batching, and classification metrics.

mod auroc;
mod batches;
mod experiment;
mod folds;
mod metrics;
mod train;

pub use auroc::{auroc, auroc_pairwise, macro_auroc, one_vs_all_auroc};
pub use batches::{apportion, balanced_batches};
pub use experiment::{
    evaluate_folds, run_experiment, train_folds, ExperimentConfig, LabeledRecord, TrainedFolds,
};
pub use train::{fit, predict_all, TrainConfig, TrainOutcome};
pub use folds::{stratified_kfold, FoldAssignment};
pub(crate) use experiment::combine_leads;
pub use metrics::{
    classification_metrics, AggregateMetrics, ClassificationMetrics, DecisionComparison,
    FoldMetrics, MetricsReport,
};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("class {class} has {count} records, fewer than k = {k}")]
    ClassTooSmall { class: usize, count: usize, k: usize },
    #[error("fold count must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("batch size {batch} is smaller than the class count {classes}")]
    BatchTooSmall { batch: usize, classes: usize },
    #[error("AUROC needs both positive and negative labels")]
    DegenerateLabels,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("invalid experiment configuration: {0}")]
    ConfigInvalid(String),
    #[error("record {0} appears in both the training and the test split")]
    Leakage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
