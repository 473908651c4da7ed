use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, predict_all};
use super::optim::{Adam, OptimizerKind, Scheduler, SchedulerConfig, ADAMW_DEFAULT_WEIGHT_DECAY};
use super::{sigmoid, Parameters, ShallowModel, TaskKind};
use crate::error::{Error, Result};
use crate::walks::ViewBundle;

/// One graph as the model sees it: feature matrices in selection order and
/// a label per task (`None` = missing).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<Array2<f64>>,
    pub labels: Vec<Option<f64>>,
}

impl Sample {
    pub fn from_bundle(model: &ShallowModel, bundle: &ViewBundle, labels: Vec<Option<f64>>) -> Result<Self> {
        let features = model.inputs(bundle)?.into_iter().map(|v| v.to_owned()).collect();
        Ok(Self { features, labels })
    }

    pub fn views(&self) -> Vec<ArrayView2<'_, f64>> {
        self.features.iter().map(|m| m.view()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    BceWithLogits,
}

impl Loss {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Regression => Loss::Mse,
            TaskKind::BinaryClassification => Loss::BceWithLogits,
        }
    }

    pub fn value(self, pred: f64, target: f64) -> f64 {
        match self {
            Loss::Mse => (pred - target) * (pred - target),
            Loss::BceWithLogits => pred.max(0.0) - pred * target + (-pred.abs()).exp().ln_1p(),
        }
    }

    pub fn derivative(self, pred: f64, target: f64) -> f64 {
        match self {
            Loss::Mse => 2.0 * (pred - target),
            Loss::BceWithLogits => sigmoid(pred) - target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    /// Only used by AdamW.
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    /// Defaults to MSE for regression and BCE-with-logits for classification.
    #[serde(default)]
    pub loss: Option<Loss>,
}

fn default_batch_size() -> usize {
    32
}
fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Adam
}
fn default_weight_decay() -> f64 {
    ADAMW_DEFAULT_WEIGHT_DECAY
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 300,
            batch_size: default_batch_size(),
            seed: 0,
            optimizer: default_optimizer(),
            weight_decay: default_weight_decay(),
            scheduler: SchedulerConfig::None,
            loss: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // a zero rate is accepted: it freezes the parameters
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be >= 0", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn loss_for(&self, task: TaskKind) -> Loss {
        self.loss.unwrap_or_else(|| Loss::for_task(task))
    }
}

/// Mean loss over every observed label in the batch, and its exact gradient.
pub fn loss_and_gradients(batch: &[&Sample], model: &ShallowModel, loss: Loss) -> Result<(f64, Parameters)> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let mut grad = Parameters::zeros(&model.config);
    let observed: usize = batch.iter().map(|s| s.labels.iter().flatten().count()).sum();
    if observed == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / observed as f64;
    let mut total = 0.0;
    for s in batch {
        if s.labels.len() != model.config.num_tasks {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} tasks",
                s.labels.len(),
                model.config.num_tasks
            )));
        }
        let views = s.views();
        let (y, trace) = model.forward_traced(&views)?;
        let mut dy = Array1::zeros(y.len());
        for (t, label) in s.labels.iter().enumerate() {
            if let Some(target) = *label {
                total += loss.value(y[t], target);
                dy[t] = loss.derivative(y[t], target) * scale;
            }
        }
        model.backward(&views, &trace, &dy, &mut grad)?;
    }
    let value = total * scale;
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0, batch: 0 });
    }
    Ok((value, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Loss over the whole training split after the epoch's updates.
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    /// MAE for regression, ROC-AUC for classification.
    pub valid_metric: Option<f64>,
}

fn split_loss(model: &ShallowModel, samples: &[Sample], loss: Loss) -> Result<f64> {
    let preds = predict_all(std::slice::from_ref(model), samples)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, s) in preds.iter().zip(samples) {
        for (t, label) in s.labels.iter().enumerate() {
            if let Some(y) = *label {
                total += loss.value(p[t], y);
                count += 1;
            }
        }
    }
    Ok(if count > 0 { total / count as f64 } else { 0.0 })
}

/// Mini-batch training. Deterministic for a fixed `cfg.seed`: the shuffle
/// order comes from a dedicated ChaCha stream.
pub fn train(
    mut model: ShallowModel,
    train_set: &[Sample],
    valid_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<(ShallowModel, Vec<EpochMetrics>)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidConfig("training split is empty".into()));
    }
    let task = model.config.settings.task;
    let loss = cfg.loss_for(task);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut opt = Adam::new(cfg.optimizer, cfg.weight_decay, model.params.len());
    let mut sched = Scheduler::new(cfg.scheduler, cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut flat = model.params.to_flat();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = sched.lr();
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (_, grad) = loss_and_gradients(&batch, &model, loss).map_err(|e| match e {
                Error::NonFiniteLoss { .. } => Error::NonFiniteLoss { epoch, batch: b },
                other => other,
            })?;
            opt.step(&mut flat, &grad.to_flat(), lr);
            model.params.set_flat(&flat);
        }
        if !model.params.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: order.len().div_ceil(cfg.batch_size) });
        }
        let train_loss = split_loss(&model, train_set, loss)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        let (valid_loss, valid_metric) = if valid_set.is_empty() {
            (None, None)
        } else {
            let vl = split_loss(&model, valid_set, loss)?;
            let preds = predict_all(std::slice::from_ref(&model), valid_set)?;
            let labels: Vec<_> = valid_set.iter().map(|s| s.labels.clone()).collect();
            let metric = compute_metrics(task, loss, &preds, &labels).ok().and_then(|m| match task {
                TaskKind::Regression => m.mae,
                TaskKind::BinaryClassification => m.roc_auc,
            });
            (Some(vl), metric)
        };
        history.push(EpochMetrics { epoch: epoch + 1, learning_rate: lr, train_loss, valid_loss, valid_metric });
        sched.step(valid_loss.unwrap_or(train_loss));
    }
    Ok((model, history))
}
