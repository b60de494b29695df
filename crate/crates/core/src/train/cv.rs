use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mae, MeanStd};
use super::split::{kfold_split, stratified_holdout};
use super::trainer::{predict_all, train_model, EpochLog, Example, TrainConfig};
use crate::dataset::{class_of, SeverityClass};
use crate::error::{Error, Result};
use crate::nn::{GatModel, GraphInput, ModelConfig};

/// One patient prepared for the model.
#[derive(Clone, Debug)]
pub struct Sample {
    pub patient_id: String,
    pub input: GraphInput,
    pub target: f64,
}

impl Sample {
    pub fn class(&self) -> SeverityClass {
        class_of(self.target.round() as i64).unwrap_or(SeverityClass::A)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub patient_id: String,
    pub target: f64,
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassError {
    pub count: usize,
    /// Absent when the class has no test patients in this fold.
    pub mae: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub replicate: usize,
    pub seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub best_val_mae: f64,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub test_mae: f64,
    pub per_class: BTreeMap<SeverityClass, ClassError>,
    /// MAE of predicting the mean training target for every test patient.
    pub baseline_mae: f64,
    pub param_count: usize,
    /// The test fold holds a single severity class.
    pub degenerate: bool,
    pub predictions: Vec<PredictionRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvAggregate {
    pub runs: usize,
    pub test_mae: MeanStd,
    pub best_val_mae: MeanStd,
    pub baseline_mae: MeanStd,
    pub per_class: BTreeMap<SeverityClass, Option<MeanStd>>,
    /// `1 - mean test MAE / mean baseline MAE`.
    pub improvement_over_baseline: f64,
    pub degenerate_folds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub n_samples: usize,
    pub param_count: usize,
    pub folds: Vec<FoldReport>,
    pub aggregate: CvAggregate,
}

pub struct CvOutcome {
    pub report: CvReport,
    /// Best checkpoint of every run, aligned with `report.folds`.
    pub models: Vec<GatModel>,
}

#[derive(Clone, Copy, Debug)]
pub struct Progress<'a> {
    pub fold: usize,
    pub replicate: usize,
    pub epoch: &'a EpochLog,
}

/// Seed of replicate `r`, derived from the base seed.
pub fn replicate_seed(base: u64, replicate: usize) -> u64 {
    base ^ (replicate as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn holdout_seed(base: u64, fold: usize) -> u64 {
    base.wrapping_add(0xD1B5_4A32_D192_ED03u64.wrapping_mul(fold as u64 + 1))
}

/// Per-class MAE of a set of predictions.
pub fn class_errors(predictions: &[PredictionRecord]) -> BTreeMap<SeverityClass, ClassError> {
    let mut out = BTreeMap::new();
    for class in SeverityClass::ALL {
        let errs: Vec<f64> = predictions
            .iter()
            .filter(|p| class_of(p.target.round() as i64).ok() == Some(class))
            .map(|p| (p.predicted - p.target).abs())
            .collect();
        let mae = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);
        out.insert(class, ClassError { count: errs.len(), mae });
    }
    out
}

/// Cross-validation over a `folds x seeds` grid. Folds and validation
/// holdouts depend only on `train.seed`; each replicate re-initializes the
/// model from its own seed. Runs execute in parallel and are reported in
/// `(fold, replicate)` order.
pub fn run_cv(
    samples: &[Sample],
    model_config: &ModelConfig,
    train: &TrainConfig,
    progress: &(dyn Fn(Progress<'_>) + Sync),
) -> Result<CvOutcome> {
    train.validate()?;
    model_config.validate()?;
    if samples.len() < train.folds {
        return Err(Error::Argument(format!(
            "{} patients cannot fill {} folds",
            samples.len(),
            train.folds
        )));
    }
    let folds = kfold_split(samples.len(), train.folds, train.seed)?;
    let classes: Vec<SeverityClass> = samples.iter().map(Sample::class).collect();

    let mut plans = Vec::with_capacity(folds.len());
    for (f, test) in folds.iter().enumerate() {
        let rest: Vec<usize> = (0..samples.len()).filter(|i| test.binary_search(i).is_err()).collect();
        let (fit, val) = stratified_holdout(&rest, &classes, train.val_fraction, holdout_seed(train.seed, f))?;
        plans.push((f, fit, val, test.clone()));
    }
    let grid: Vec<(usize, usize)> = (0..folds.len())
        .flat_map(|f| (0..train.seeds).map(move |r| (f, r)))
        .collect();

    let runs: Vec<(FoldReport, GatModel)> = grid
        .par_iter()
        .map(|&(f, r)| {
            let (_, fit, val, test) = &plans[f];
            let pick = |idx: &[usize]| -> Vec<Example<'_>> {
                idx.iter()
                    .map(|&i| Example { input: &samples[i].input, target: samples[i].target })
                    .collect()
            };
            let (fit_ex, val_ex, test_ex) = (pick(fit), pick(val), pick(test));
            let seed = replicate_seed(train.seed, r);
            let outcome = train_model(model_config, train, &fit_ex, &val_ex, seed, |log| {
                progress(Progress { fold: f, replicate: r, epoch: log })
            })?;
            let preds = predict_all(&outcome.model, &test_ex, train.batch_size)?;
            let targets: Vec<f64> = test_ex.iter().map(|e| e.target).collect();
            let train_mean = fit_ex.iter().map(|e| e.target).sum::<f64>() / fit_ex.len() as f64;
            let predictions: Vec<PredictionRecord> = test
                .iter()
                .zip(&preds)
                .map(|(&i, &p)| PredictionRecord {
                    patient_id: samples[i].patient_id.clone(),
                    target: samples[i].target,
                    predicted: p,
                })
                .collect();
            let per_class = class_errors(&predictions);
            let present = per_class.values().filter(|c| c.count > 0).count();
            let report = FoldReport {
                fold: f,
                replicate: r,
                seed,
                train_size: fit.len(),
                val_size: val.len(),
                test_size: test.len(),
                best_val_mae: outcome.best_val_mae,
                best_epoch: outcome.best_epoch,
                stopped_epoch: outcome.stopped_epoch,
                test_mae: mae(&preds, &targets)?,
                per_class,
                baseline_mae: mae(&vec![train_mean; targets.len()], &targets)?,
                param_count: outcome.model.param_count(),
                degenerate: present < 2,
                predictions,
            };
            Ok((report, outcome.model))
        })
        .collect::<Result<_>>()?;

    let (reports, models): (Vec<FoldReport>, Vec<GatModel>) = runs.into_iter().unzip();
    let aggregate = aggregate(&reports);
    Ok(CvOutcome {
        report: CvReport {
            n_samples: samples.len(),
            param_count: models.first().map_or(0, GatModel::param_count),
            folds: reports,
            aggregate,
        },
        models,
    })
}

pub fn aggregate(reports: &[FoldReport]) -> CvAggregate {
    let collect = |f: &dyn Fn(&FoldReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
    let empty = MeanStd { mean: f64::NAN, std: f64::NAN, n: 0 };
    let test = MeanStd::of(&collect(&|r| r.test_mae)).unwrap_or(empty);
    let baseline = MeanStd::of(&collect(&|r| r.baseline_mae)).unwrap_or(empty);
    let per_class = SeverityClass::ALL
        .iter()
        .map(|&c| {
            let values: Vec<f64> = reports.iter().filter_map(|r| r.per_class.get(&c).and_then(|e| e.mae)).collect();
            (c, MeanStd::of(&values))
        })
        .collect();
    CvAggregate {
        runs: reports.len(),
        test_mae: test,
        best_val_mae: MeanStd::of(&collect(&|r| r.best_val_mae)).unwrap_or(empty),
        baseline_mae: baseline,
        per_class,
        improvement_over_baseline: 1.0 - test.mean / baseline.mean,
        degenerate_folds: reports.iter().filter(|r| r.degenerate).count(),
    }
}
