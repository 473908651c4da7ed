use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::train::{Loss, Sample};
use super::{ShallowModel, TaskKind};
use crate::error::{Error, Result};

pub fn mae(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64
}

pub fn mse(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

pub fn rmse(pred: &[f64], target: &[f64]) -> f64 {
    mse(pred, target).sqrt()
}

/// Coefficient of determination. NaN when the targets are constant.
pub fn r2(pred: &[f64], target: &[f64]) -> f64 {
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    if ss_tot == 0.0 {
        return f64::NAN;
    }
    1.0 - ss_res / ss_tot
}

/// Area under the ROC curve via the Mann-Whitney rank statistic, ties
/// counted as one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels(format!("{pos} positives and {neg} negatives")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Split-level metrics. Multi-task values are averaged over tasks that
/// have at least one label (and, for ROC-AUC, both classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub count: usize,
    /// Value of the training loss on this split.
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc: Option<f64>,
}

impl Metrics {
    /// Named values in a fixed order, for tabular output.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![("count", self.count as f64), ("loss", self.loss)];
        for (name, v) in [("mae", self.mae), ("rmse", self.rmse), ("r2", self.r2), ("roc_auc", self.roc_auc)] {
            if let Some(v) = v {
                out.push((name, v));
            }
        }
        out
    }
}

/// Like [`compute_metrics`] but leaves `roc_auc` empty instead of failing
/// when no task has both classes.
pub fn summarize(task: TaskKind, loss: Loss, preds: &[Array1<f64>], labels: &[Vec<Option<f64>>]) -> Result<Metrics> {
    match compute_metrics(task, loss, preds, labels) {
        Err(Error::DegenerateLabels(_)) => compute_metrics(TaskKind::Regression, loss, preds, labels).map(|m| Metrics {
            mae: None,
            rmse: None,
            r2: None,
            ..m
        }),
        other => other,
    }
}

pub fn compute_metrics(task: TaskKind, loss: Loss, preds: &[Array1<f64>], labels: &[Vec<Option<f64>>]) -> Result<Metrics> {
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    let tasks = preds.first().map_or(0, |p| p.len());
    let mut per_task = Vec::with_capacity(tasks);
    let mut loss_sum = 0.0;
    let mut observed = 0usize;
    for t in 0..tasks {
        let (p, y): (Vec<f64>, Vec<f64>) = preds
            .iter()
            .zip(labels)
            .filter_map(|(p, l)| l.get(t).copied().flatten().map(|y| (p[t], y)))
            .unzip();
        loss_sum += p.iter().zip(&y).map(|(&p, &y)| loss.value(p, y)).sum::<f64>();
        observed += p.len();
        if !p.is_empty() {
            per_task.push((p, y));
        }
    }
    let mean_of = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    let mut m = Metrics {
        count: preds.len(),
        loss: if observed > 0 { loss_sum / observed as f64 } else { 0.0 },
        mae: None,
        rmse: None,
        r2: None,
        roc_auc: None,
    };
    match task {
        TaskKind::Regression => {
            m.mae = mean_of(per_task.iter().map(|(p, y)| mae(p, y)).collect());
            m.rmse = mean_of(per_task.iter().map(|(p, y)| rmse(p, y)).collect());
            m.r2 = mean_of(per_task.iter().map(|(p, y)| r2(p, y)).collect());
        }
        TaskKind::BinaryClassification => {
            let aucs: Vec<f64> = per_task
                .iter()
                .filter_map(|(p, y)| roc_auc(p, &y.iter().map(|&v| v > 0.5).collect::<Vec<_>>()).ok())
                .collect();
            if aucs.is_empty() && !per_task.is_empty() {
                return Err(Error::DegenerateLabels("every task has a single class".into()));
            }
            m.roc_auc = mean_of(aucs);
        }
    }
    Ok(m)
}

/// Ensemble-averaged predictions for each sample.
pub fn predict_all(models: &[ShallowModel], samples: &[Sample]) -> Result<Vec<Array1<f64>>> {
    if models.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    samples
        .iter()
        .map(|s| {
            let mut sum: Option<Array1<f64>> = None;
            for m in models {
                let y = m.forward(&s.views())?;
                sum = Some(match sum {
                    Some(acc) => acc + &y,
                    None => y,
                });
            }
            Ok(sum.expect("non-empty ensemble") / models.len() as f64)
        })
        .collect()
}

/// Metrics of the ensemble-averaged prediction on `samples`.
pub fn evaluate(models: &[ShallowModel], samples: &[Sample], loss: Loss) -> Result<Metrics> {
    let first = models.first().ok_or(Error::EmptyEnsemble)?;
    let preds = predict_all(models, samples)?;
    let labels: Vec<Vec<Option<f64>>> = samples.iter().map(|s| s.labels.clone()).collect();
    compute_metrics(first.config.settings.task, loss, &preds, &labels)
}
