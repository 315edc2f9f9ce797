//! Labels, training loop, evaluation and subject-level cross-validation.

pub mod cv;
pub mod folds;
pub mod labels;
pub mod metrics;
pub mod train;

pub use cv::{run_fold, CvSummary, FoldReport};
pub use folds::{kfold_split, Fold};
pub use labels::{merge_labels, AasmStage, StageLabel};
pub use metrics::{mean_std, metrics_from_confusion, per_class_f1, Confusion, Metrics};
pub use train::{evaluate, loss_and_grads, predict, train, train_from, Batch, EvalReport, TrainConfig, TrainOutcome};
