//! Optimization, scheduling, data splits and cross-validation.

mod cv;
mod metrics;
mod optim;
mod schedule;
mod split;
mod trainer;

pub use cv::{
    aggregate, class_errors, replicate_seed, run_cv, ClassError, CvAggregate, CvOutcome, CvReport, FoldReport,
    PredictionRecord, Progress, Sample,
};
pub use metrics::{mae, mse, MeanStd};
pub use optim::{Adam, AdamConfig};
pub use schedule::PlateauScheduler;
pub use split::{kfold_split, stratified_holdout};
pub use trainer::{predict_all, train_model, EpochLog, Example, TrainConfig, TrainOutcome};
