use serde::{Deserialize, Serialize};

use super::folds::Fold;
use super::metrics::{mean_std, Metrics};
use super::train::{train_from, EvalReport, TrainConfig, evaluate};
use crate::model::{init_params, ModelSpec};
use crate::superwin::SuperWindowSet;
use crate::tensorcore::{ParamStore, Real};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_subjects: Vec<String>,
    pub val_subjects: Vec<String>,
    pub loss_trace: Vec<f64>,
    pub val: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: Vec<FoldReport>,
    pub mean: Metrics,
    /// Population standard deviation across folds.
    pub std: Metrics,
}

impl CvSummary {
    pub fn from_folds(folds: Vec<FoldReport>) -> Self {
        let per_fold: Vec<Metrics> = folds.iter().map(|f| f.val.metrics).collect();
        let (mean, std) = mean_std(&per_fold);
        Self { folds, mean, std }
    }
}

/// Trains a fresh model on the fold's training subjects and scores it on
/// the held-out ones.
pub fn run_fold<T: Real>(
    config: &TrainConfig,
    spec: &ModelSpec,
    data: &SuperWindowSet,
    index: usize,
    fold: &Fold,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<(FoldReport, ParamStore<T>)> {
    let train_set = data.subset(fold.train.iter().map(String::as_str));
    let val_set = data.subset(fold.val.iter().map(String::as_str));
    let params = init_params(spec, config.seed)?;
    let out = train_from(params, config, spec, &train_set, progress)?;
    let val = evaluate(&out.params, spec, &val_set)?;
    let report = FoldReport {
        fold: index,
        train_subjects: fold.train.clone(),
        val_subjects: fold.val.clone(),
        loss_trace: out.loss_trace,
        val,
    };
    Ok((report, out.params))
}
