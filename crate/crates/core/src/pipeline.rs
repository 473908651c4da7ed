//! Dataset orchestration: validation, repair, view construction and
//! multi-seed training runs. Nothing here touches the filesystem.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ViewSelection;
use crate::graph::{AttributedGraph, RawGraph};
use crate::model::metrics::{predict_all, summarize, Metrics};
use crate::model::train::{train, EpochMetrics, Loss, Sample, TrainConfig};
use crate::model::{ModelConfig, ModelSettings, ShallowModel, TaskKind};
use crate::repair::{repair, RepairRecord};
use crate::spectral::check_gamma;
use crate::walks::{ViewBundle, ViewKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Parse(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphRecord {
    pub id: String,
    pub graph: RawGraph,
    /// One entry per task, `None` where the label is missing.
    pub labels: Vec<Option<f64>>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<GraphRecord>,
    pub num_tasks: usize,
}

impl DatasetManifest {
    pub fn new(records: Vec<GraphRecord>, num_tasks: usize) -> Result<Self> {
        let m = Self { records, num_tasks };
        m.validate()?;
        Ok(m)
    }

    /// Ids are unique and every label vector has `num_tasks` entries.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate graph id {:?}", r.id)));
            }
            if r.labels.len() != self.num_tasks {
                return Err(Error::DimensionMismatch(format!(
                    "graph {:?} has {} labels, expected {}",
                    r.id,
                    r.labels.len(),
                    self.num_tasks
                )));
            }
        }
        Ok(())
    }
}

/// A graph that failed somewhere between parsing and view construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFailure {
    pub id: String,
    pub code: String,
    pub message: String,
}

impl GraphFailure {
    pub fn new(id: impl Into<String>, e: &Error) -> Self {
        Self { id: id.into(), code: e.code().to_string(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedGraph {
    pub id: String,
    pub split: Split,
    pub labels: Vec<Option<f64>>,
    pub repair: RepairRecord,
    /// The repaired graph.
    pub graph: AttributedGraph,
    pub bundle: ViewBundle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedStore {
    pub gamma: f64,
    pub views: Vec<ViewKind>,
    pub num_tasks: usize,
    /// Successful graphs in manifest order.
    pub graphs: Vec<ProcessedGraph>,
    pub failures: Vec<GraphFailure>,
}

impl ProcessedStore {
    /// Common feature width, or `None` for an empty store.
    pub fn feature_dim(&self) -> Result<Option<usize>> {
        let mut dims = self.graphs.iter().map(|g| (g.id.as_str(), g.bundle.feature_dim()));
        let Some((_, first)) = dims.next() else {
            return Ok(None);
        };
        match dims.find(|&(_, d)| d != first) {
            Some((id, d)) => Err(Error::DimensionMismatch(format!("graph {id:?} has {d} feature columns, expected {first}"))),
            None => Ok(Some(first)),
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ProcessedGraph> {
        self.graphs.iter().filter(move |g| g.split == split)
    }

    /// Model inputs for one split, feature matrices in selection order.
    pub fn samples(&self, sel: &ViewSelection, split: Split) -> Result<Vec<Sample>> {
        self.split(split)
            .map(|g| {
                let features = sel
                    .kinds()
                    .iter()
                    .map(|&k| g.bundle.feature_matrix(k).cloned())
                    .collect::<Result<Vec<_>>>()?;
                Ok(Sample { features, labels: g.labels.clone() })
            })
            .collect()
    }
}

/// Validates, repairs and expands one graph.
pub fn process_graph(raw: RawGraph, kinds: &[ViewKind], gamma: f64) -> Result<(AttributedGraph, RepairRecord, ViewBundle)> {
    let g = AttributedGraph::try_from(raw)?;
    let (repaired, record) = repair(&g)?;
    let bundle = ViewBundle::build(&repaired, kinds, gamma)?;
    Ok((repaired, record, bundle))
}

/// Processes every graph in parallel. Per-graph failures are collected with
/// their ids; only invalid parameters or an inconsistent manifest abort.
pub fn process_dataset(manifest: &DatasetManifest, gamma: f64, views: &[ViewKind]) -> Result<ProcessedStore> {
    check_gamma(gamma)?;
    manifest.validate()?;
    let sel = ViewSelection::new(views, gamma)?;
    let kinds = sel.kinds().to_vec();
    let results: Vec<_> = manifest
        .records
        .par_iter()
        .map(|r| process_graph(r.graph.clone(), &kinds, gamma))
        .collect();
    let mut graphs = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in manifest.records.iter().zip(results) {
        match res {
            Ok((graph, repair, bundle)) => graphs.push(ProcessedGraph {
                id: r.id.clone(),
                split: r.split,
                labels: r.labels.clone(),
                repair,
                graph,
                bundle,
            }),
            Err(e) => failures.push(GraphFailure::new(&r.id, &e)),
        }
    }
    Ok(ProcessedStore { gamma, views: kinds, num_tasks: manifest.num_tasks, graphs, failures })
}

/// Contents of a training config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSettings,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    /// Metrics after the last epoch, per non-empty split.
    pub final_metrics: BTreeMap<Split, Metrics>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    /// Mean of each per-seed metric over successful seeds.
    pub mean: BTreeMap<String, f64>,
    /// Population standard deviation of the same values.
    pub std: BTreeMap<String, f64>,
    /// Metrics of the seed-averaged prediction.
    pub ensemble: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
    pub failures: Vec<SeedFailure>,
    /// Number of models in the ensemble (successful seeds).
    pub ensemble_size: usize,
    pub summary: BTreeMap<Split, SplitSummary>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: ExperimentReport,
    /// Trained models of the successful seeds, in seed order.
    pub models: Vec<(u64, ShallowModel)>,
}

fn model_config(store: &ProcessedStore, settings: &ModelSettings) -> Result<ModelConfig> {
    let feature_dim = store
        .feature_dim()?
        .ok_or_else(|| Error::InvalidConfig("no graph survived processing".into()))?;
    if settings.views.contains(&ViewKind::WalkGamma) && settings.gamma != store.gamma {
        return Err(Error::InvalidConfig(format!(
            "model gamma {} differs from processed gamma {}",
            settings.gamma, store.gamma
        )));
    }
    if let Some(k) = settings.views.iter().find(|k| **k != ViewKind::Raw && !store.views.contains(k)) {
        return Err(Error::DimensionMismatch(format!("store was built without the {k} view")));
    }
    ModelConfig::new(settings.clone(), feature_dim, store.num_tasks)
}

fn split_metrics(
    models: &[ShallowModel],
    samples: &BTreeMap<Split, Vec<Sample>>,
    task: TaskKind,
    loss: Loss,
) -> Result<BTreeMap<Split, Metrics>> {
    let mut out = BTreeMap::new();
    for (&split, set) in samples {
        if set.is_empty() {
            continue;
        }
        let preds = predict_all(models, set)?;
        let labels: Vec<_> = set.iter().map(|s| s.labels.clone()).collect();
        out.insert(split, summarize(task, loss, &preds, &labels)?);
    }
    Ok(out)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains `n_seeds` models with seeds `seed0..seed0 + n_seeds`. Seeds run in
/// parallel; a failing seed is recorded and the others continue. Test
/// labels are only used for reporting.
pub fn run_experiment(
    store: &ProcessedStore,
    settings: &ModelSettings,
    train_cfg: &TrainConfig,
    seed0: u64,
    n_seeds: usize,
) -> Result<Experiment> {
    if n_seeds == 0 {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    train_cfg.validate()?;
    let cfg = model_config(store, settings)?;
    let (sel, _) = settings.selection()?;
    let task = settings.task;
    let loss = train_cfg.loss_for(task);
    let samples: BTreeMap<Split, Vec<Sample>> =
        Split::ALL.iter().map(|&s| Ok((s, store.samples(&sel, s)?))).collect::<Result<_>>()?;
    let train_set = &samples[&Split::Train];
    let valid_set = &samples[&Split::Valid];

    let outcomes: Vec<(u64, Result<(ShallowModel, RunRecord)>)> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let seed = seed0 + i;
            let run = || -> Result<(ShallowModel, RunRecord)> {
                let start = Instant::now();
                let tc = TrainConfig { seed, ..train_cfg.clone() };
                let (model, epochs) = train(ShallowModel::new(cfg.clone(), seed)?, train_set, valid_set, &tc)?;
                let final_metrics = split_metrics(std::slice::from_ref(&model), &samples, task, loss)?;
                let record = RunRecord {
                    model: cfg.clone(),
                    train: tc,
                    seed,
                    epochs,
                    final_metrics,
                    wall_time_secs: start.elapsed().as_secs_f64(),
                };
                Ok((model, record))
            };
            (seed, run())
        })
        .collect();

    let mut runs = Vec::new();
    let mut models = Vec::new();
    let mut failures = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok((model, record)) => {
                runs.push(record);
                models.push((seed, model));
            }
            Err(e) => failures.push(SeedFailure { seed, code: e.code().into(), message: e.to_string() }),
        }
    }

    let mut summary = BTreeMap::new();
    if !models.is_empty() {
        let ensemble_models: Vec<ShallowModel> = models.iter().map(|(_, m)| m.clone()).collect();
        let ensemble = split_metrics(&ensemble_models, &samples, task, loss)?;
        for (split, ens) in ensemble {
            let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in &runs {
                for (name, v) in r.final_metrics[&split].entries() {
                    if name != "count" {
                        per_metric.entry(name.to_string()).or_default().push(v);
                    }
                }
            }
            let mut mean = BTreeMap::new();
            let mut std = BTreeMap::new();
            for (name, vals) in per_metric {
                let (m, s) = mean_std(&vals);
                mean.insert(name.clone(), m);
                std.insert(name, s);
            }
            summary.insert(split, SplitSummary { mean, std, ensemble: ens });
        }
    }

    Ok(Experiment {
        report: ExperimentReport { runs, failures, ensemble_size: models.len(), summary },
        models,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_model: Vec<(u64, BTreeMap<Split, Metrics>)>,
    pub ensemble: BTreeMap<Split, Metrics>,
}

/// Scores already-trained models on every non-empty split.
pub fn evaluate_models(store: &ProcessedStore, models: &[(u64, ShallowModel)]) -> Result<EvaluationReport> {
    let (_, first) = models.first().ok_or(Error::EmptyEnsemble)?;
    let cfg = model_config(store, &first.config.settings)?;
    for (seed, m) in models {
        if m.config != cfg {
            return Err(Error::DimensionMismatch(format!(
                "checkpoint for seed {seed} expects {} features and {} tasks, data has {} and {}",
                m.config.feature_dim, m.config.num_tasks, cfg.feature_dim, cfg.num_tasks
            )));
        }
    }
    let (sel, _) = cfg.settings.selection()?;
    let task = cfg.settings.task;
    let loss = Loss::for_task(task);
    let samples: BTreeMap<Split, Vec<Sample>> =
        Split::ALL.iter().map(|&s| Ok((s, store.samples(&sel, s)?))).collect::<Result<_>>()?;
    let per_model = models
        .iter()
        .map(|(seed, m)| Ok((*seed, split_metrics(std::slice::from_ref(m), &samples, task, loss)?)))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<ShallowModel> = models.iter().map(|(_, m)| m.clone()).collect();
    let ensemble = split_metrics(&all, &samples, task, loss)?;
    Ok(EvaluationReport { per_model, ensemble })
}
