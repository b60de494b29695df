use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{mae, mse};
use super::optim::{Adam, AdamConfig};
use super::schedule::PlateauScheduler;
use crate::error::{Error, Result};
use crate::nn::{GatModel, GraphBatch, GraphInput, Mode, ModelConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub decoupled_weight_decay: bool,
    pub plateau_patience: usize,
    pub lr_factor: f64,
    pub plateau_threshold: f64,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub folds: usize,
    pub seeds: usize,
    pub val_fraction: f64,
    /// Drives fold assignment, validation holdout and every model seed.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            lr: 6.4e-3,
            weight_decay: 2.25e-4,
            decoupled_weight_decay: false,
            plateau_patience: 20,
            lr_factor: 0.5,
            plateau_threshold: PlateauScheduler::DEFAULT_THRESHOLD,
            early_stop_patience: 50,
            max_epochs: 500,
            folds: 5,
            seeds: 5,
            val_fraction: 0.2,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("batch_size", self.batch_size),
            ("plateau_patience", self.plateau_patience),
            ("early_stop_patience", self.early_stop_patience),
            ("max_epochs", self.max_epochs),
            ("seeds", self.seeds),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Argument(format!("train.{name} must be positive")));
            }
        }
        if self.folds < 2 {
            return Err(Error::Argument(format!("train.folds must be at least 2, got {}", self.folds)));
        }
        let reals = [("lr", self.lr), ("lr_factor", self.lr_factor)];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Argument(format!("train.{name} must be positive")));
            }
        }
        if self.lr_factor >= 1.0 {
            return Err(Error::Argument("train.lr_factor must be below 1".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Argument("train.weight_decay must be non-negative".into()));
        }
        if !(self.plateau_threshold.is_finite() && self.plateau_threshold >= 0.0) {
            return Err(Error::Argument("train.plateau_threshold must be non-negative".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Argument("train.val_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            weight_decay: self.weight_decay,
            decoupled: self.decoupled_weight_decay,
            ..AdamConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mse: f64,
    pub val_mae: f64,
    /// Rate used during this epoch.
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MAE.
    pub model: GatModel,
    pub best_val_mae: f64,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub history: Vec<EpochLog>,
}

/// Labelled training example.
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub input: &'a GraphInput,
    pub target: f64,
}

pub fn predict_all(model: &GatModel, examples: &[Example<'_>], chunk: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(examples.len());
    for part in examples.chunks(chunk.max(1)) {
        let inputs: Vec<&GraphInput> = part.iter().map(|e| e.input).collect();
        out.extend(model.predict(&GraphBatch::new(&inputs)?)?);
    }
    Ok(out)
}

/// Mini-batch Adam on MSE with plateau scheduling on validation MSE and
/// early stopping on validation MAE. The output bias starts at the mean
/// training target.
pub fn train_model(
    model_config: &ModelConfig,
    config: &TrainConfig,
    train: &[Example<'_>],
    val: &[Example<'_>],
    seed: u64,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Argument(format!(
            "training needs nonempty train and validation sets, got {} and {}",
            train.len(),
            val.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = GatModel::new(model_config.clone(), rng.random())?;
    model.set_output_bias(train.iter().map(|e| e.target).sum::<f64>() / train.len() as f64);

    let mut adam = Adam::new(config.adam());
    let mut scheduler =
        PlateauScheduler::new(config.lr, config.lr_factor, config.plateau_patience).with_threshold(config.plateau_threshold);
    let val_targets: Vec<f64> = val.iter().map(|e| e.target).collect();

    let mut best = (f64::INFINITY, 0, model.clone());
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopped = config.max_epochs;
    for epoch in 1..=config.max_epochs {
        let lr = scheduler.lr();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let inputs: Vec<&GraphInput> = chunk.iter().map(|&i| train[i].input).collect();
            let targets: Vec<f64> = chunk.iter().map(|&i| train[i].target).collect();
            let batch = GraphBatch::new(&inputs)?;
            let out = model.loss_and_grads(&batch, &targets, Mode::Train { seed: rng.random() })?;
            adam.step(model.params_mut(), &out.grads, lr)?;
            loss_sum += out.loss * chunk.len() as f64;
        }
        let preds = predict_all(&model, val, config.batch_size)?;
        let log = EpochLog {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_mse: mse(&preds, &val_targets)?,
            val_mae: mae(&preds, &val_targets)?,
            lr,
        };
        on_epoch(&log);
        scheduler.step(log.val_mse);
        if log.val_mae < best.0 {
            best = (log.val_mae, epoch, model.clone());
        }
        history.push(log);
        if epoch - best.1 >= config.early_stop_patience {
            stopped = epoch;
            break;
        }
    }
    let (best_val_mae, best_epoch, model) = best;
    Ok(TrainOutcome { model, best_val_mae, best_epoch, stopped_epoch: stopped, history })
}
