//! On-disk formats. Every writer goes through [`atomic_write`], so a crash
//! never leaves a partial file behind.
//!
//! Node indices are 0-based everywhere. Floats are written in their
//! shortest round-trip form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{one_hot_encode, Fingerprint, Vocabulary};
use crate::graph::{AttributedGraph, Edge, RawGraph};
use crate::model::{ModelConfig, Parameters, ShallowModel};
use crate::pipeline::{
    DatasetManifest, EvaluationReport, ExperimentReport, GraphFailure, GraphRecord, ProcessedGraph, Split,
};
use crate::repair::RepairRecord;
use crate::walks::{ViewKind, WalkView};

pub const CHECKPOINT_FORMAT: &str = "graphwalk-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Writes via a sibling temp file and a rename. Creates parent directories.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, to_json(value)?.as_bytes())
}

/// Single-line JSON; used for the large numeric documents.
pub fn write_json_compact<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string(value)?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

fn matrix_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], n: usize) -> Result<Array2<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if let Some(k) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Parse(format!("row {k} has {} entries, expected {width}", rows[k].len())));
    }
    if rows.is_empty() {
        return Ok(Array2::zeros((n, 0)));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), width), flat).map_err(|e| Error::Parse(e.to_string()))
}

/// `[i, j]` or `[i, j, w]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeEntry {
    Unit(usize, usize),
    Weighted(usize, usize, f64),
}

impl EdgeEntry {
    pub fn edge(self) -> Edge {
        match self {
            EdgeEntry::Unit(u, v) => Edge::unit(u, v),
            EdgeEntry::Weighted(u, v, w) => Edge::new(u, v, w),
        }
    }

    pub fn from_edge(e: Edge) -> Self {
        if e.weight == 1.0 {
            EdgeEntry::Unit(e.u, e.v)
        } else {
            EdgeEntry::Weighted(e.u, e.v, e.weight)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub id: String,
    pub n: usize,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
    /// Numeric node features, one row per node. May be empty when
    /// `categorical` supplies the features.
    #[serde(default)]
    pub features: Vec<Vec<f64>>,
    /// Per-attribute category of every node, one-hot encoded after the
    /// numeric columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categorical: Option<BTreeMap<String, Vec<String>>>,
}

impl GraphDocument {
    pub fn from_graph(id: &str, g: &AttributedGraph) -> Self {
        Self {
            id: id.to_string(),
            n: g.node_count(),
            edges: g.edges().iter().map(|&e| EdgeEntry::from_edge(e)).collect(),
            features: matrix_rows(&g.features().to_owned()),
            categorical: None,
        }
    }

    /// Numeric features followed by the one-hot block, if any.
    pub fn to_raw(&self, vocab: &Vocabulary) -> Result<RawGraph> {
        let mut features = rows_to_matrix(&self.features, self.n)?;
        if let Some(attrs) = &self.categorical {
            let hot = one_hot_encode(attrs, vocab)?;
            if hot.nrows() != features.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} categorical rows for {} feature rows",
                    hot.nrows(),
                    features.nrows()
                )));
            }
            features = ndarray::concatenate(ndarray::Axis(1), &[features.view(), hot.view()])
                .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        }
        Ok(RawGraph { node_count: self.n, edges: self.edges.iter().map(|e| e.edge()).collect(), features })
    }
}

pub fn read_graph_document(path: &Path) -> Result<GraphDocument> {
    read_json(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDocument {
    pub kind: ViewKind,
    pub adjacency: Vec<Vec<f64>>,
    pub stationary: Vec<f64>,
    pub scaled_features: Vec<Vec<f64>>,
}

impl ViewDocument {
    fn from_view(v: &WalkView) -> Self {
        Self {
            kind: v.kind.view_kind(),
            adjacency: matrix_rows(&v.adjacency),
            stationary: v.stationary.to_vec(),
            scaled_features: matrix_rows(&v.scaled_features),
        }
    }

    pub fn adjacency_matrix(&self) -> Result<Array2<f64>> {
        rows_to_matrix(&self.adjacency, 0)
    }

    pub fn scaled_feature_matrix(&self) -> Result<Array2<f64>> {
        rows_to_matrix(&self.scaled_features, 0)
    }
}

/// A processed graph: the repaired graph and its walk views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleDocument {
    pub id: String,
    pub gamma: f64,
    pub repair: RepairRecord,
    /// Node count after repair.
    pub n: usize,
    pub edges: Vec<EdgeEntry>,
    pub features: Vec<Vec<f64>>,
    pub views: Vec<ViewDocument>,
}

impl BundleDocument {
    pub fn from_processed(p: &ProcessedGraph, gamma: f64) -> Self {
        Self {
            id: p.id.clone(),
            gamma,
            repair: p.repair.clone(),
            n: p.graph.node_count(),
            edges: p.graph.edges().iter().map(|&e| EdgeEntry::from_edge(e)).collect(),
            features: matrix_rows(&p.bundle.features),
            views: p.bundle.views().map(ViewDocument::from_view).collect(),
        }
    }

    pub fn feature_matrix(&self) -> Result<Array2<f64>> {
        rows_to_matrix(&self.features, self.n)
    }
}

/// Bundle file name for a graph id.
pub fn bundle_file_name(id: &str) -> String {
    format!("{id}.bundle.json")
}

/// Ids become file names, so path syntax is rejected.
pub fn check_id(id: &str) -> Result<()> {
    let bad = id.is_empty() || id.starts_with('.') || id.contains(['/', '\\']) || id.chars().any(char::is_control);
    if bad {
        return Err(Error::Parse(format!("graph id {id:?} is not usable as a file name")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Path(PathBuf),
    Inline(GraphDocument),
}

/// One line of a JSON-lines manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLine {
    pub graph: GraphSource,
    #[serde(default)]
    pub label: Vec<Option<f64>>,
    pub split: Split,
}

/// A manifest plus the graphs that could not even be parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub manifest: DatasetManifest,
    pub vocabulary: Vocabulary,
    pub failures: Vec<GraphFailure>,
}

fn stem(path: &Path) -> String {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(".json").unwrap_or(&name).to_string()
}

struct Pending {
    fallback_id: String,
    doc: Result<GraphDocument>,
    labels: Vec<Option<f64>>,
    split: Split,
}

fn assemble(pending: Vec<Pending>, num_tasks: usize) -> Result<LoadedDataset> {
    let vocabulary = Vocabulary::collect(pending.iter().filter_map(|p| p.doc.as_ref().ok()?.categorical.as_ref()));
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for p in pending {
        let id = p.doc.as_ref().map_or(p.fallback_id.clone(), |d| d.id.clone());
        let raw = p.doc.and_then(|d| {
            check_id(&d.id)?;
            d.to_raw(&vocabulary)
        });
        match raw {
            Ok(graph) => records.push(GraphRecord { id, graph, labels: p.labels, split: p.split }),
            Err(e) => failures.push(GraphFailure::new(id, &e)),
        }
    }
    Ok(LoadedDataset { manifest: DatasetManifest::new(records, num_tasks)?, vocabulary, failures })
}

/// Reads a JSON-lines manifest. Graph paths are relative to the manifest's
/// directory. Unreadable graphs become failures; a malformed manifest line
/// is fatal.
pub fn load_manifest(path: &Path) -> Result<LoadedDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut pending = Vec::new();
    let mut num_tasks = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestLine = serde_json::from_str(line)
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        let arity = *num_tasks.get_or_insert(entry.label.len());
        if entry.label.len() != arity {
            return Err(Error::DimensionMismatch(format!(
                "{}:{}: {} labels, expected {arity}",
                path.display(),
                lineno + 1,
                entry.label.len()
            )));
        }
        let (fallback_id, doc) = match entry.graph {
            GraphSource::Inline(doc) => (doc.id.clone(), Ok(doc)),
            GraphSource::Path(p) => {
                let full = base.join(&p);
                (stem(&full), read_graph_document(&full))
            }
        };
        pending.push(Pending { fallback_id, doc, labels: entry.label, split: entry.split });
    }
    assemble(pending, num_tasks.unwrap_or(0))
}

/// Loads graph documents for label-free commands. `path` may be a single
/// graph file, a directory of `*.json` graph files (sorted by name, bundle
/// files skipped) or a `.jsonl` manifest.
pub fn load_graphs(path: &Path) -> Result<LoadedDataset> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        v.retain(|p| {
            let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            p.is_file() && name.ends_with(".json") && !name.ends_with(".bundle.json")
        });
        v.sort();
        v
    } else if path.extension().is_some_and(|e| e == "jsonl") {
        return load_manifest(path);
    } else if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        return Err(Error::Io(format!("{}: no such file or directory", path.display())));
    };
    let pending = files
        .iter()
        .map(|f| Pending { fallback_id: stem(f), doc: read_graph_document(f), labels: vec![], split: Split::Train })
        .collect();
    assemble(pending, 0)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Header `id,v0,...,v(k-1)` then one row per fingerprint.
pub fn fingerprints_csv(fps: &[Fingerprint]) -> Result<String> {
    let width = fps.first().map_or(0, |f| f.values.len());
    let mut out = String::from("id");
    for k in 0..width {
        write!(out, ",v{k}").expect("write to String");
    }
    out.push('\n');
    for f in fps {
        if f.values.len() != width {
            return Err(Error::DimensionMismatch(format!("fingerprint {:?} has {} values", f.graph_id, f.values.len())));
        }
        out.push_str(&csv_field(&f.graph_id));
        for v in &f.values {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

const METRICS_HEADER: &str = "scope,seed,epoch,split,metric,value\n";

fn metrics_row(out: &mut String, scope: &str, seed: Option<u64>, epoch: Option<usize>, split: Option<Split>, metric: &str, v: f64) {
    let opt = |x: Option<String>| x.unwrap_or_default();
    writeln!(
        out,
        "{scope},{},{},{},{metric},{}",
        opt(seed.map(|s| s.to_string())),
        opt(epoch.map(|e| e.to_string())),
        opt(split.map(|s| s.to_string())),
        format_float(v)
    )
    .expect("write to String");
}

/// Long-format metrics of a training run. Wall times are left out so the
/// file is reproducible.
pub fn experiment_metrics_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(METRICS_HEADER);
    for run in &report.runs {
        let metric_name = match run.model.settings.task {
            crate::model::TaskKind::Regression => "mae",
            crate::model::TaskKind::BinaryClassification => "roc_auc",
        };
        for e in &run.epochs {
            let (s, ep) = (Some(run.seed), Some(e.epoch));
            metrics_row(&mut out, "epoch", s, ep, None, "lr", e.learning_rate);
            metrics_row(&mut out, "epoch", s, ep, Some(Split::Train), "loss", e.train_loss);
            if let Some(v) = e.valid_loss {
                metrics_row(&mut out, "epoch", s, ep, Some(Split::Valid), "loss", v);
            }
            if let Some(v) = e.valid_metric {
                metrics_row(&mut out, "epoch", s, ep, Some(Split::Valid), metric_name, v);
            }
        }
        for (&split, m) in &run.final_metrics {
            for (name, v) in m.entries() {
                metrics_row(&mut out, "final", Some(run.seed), None, Some(split), name, v);
            }
        }
    }
    for (&split, s) in &report.summary {
        for (name, &v) in &s.mean {
            metrics_row(&mut out, "mean", None, None, Some(split), name, v);
        }
        for (name, &v) in &s.std {
            metrics_row(&mut out, "std", None, None, Some(split), name, v);
        }
        for (name, v) in s.ensemble.entries() {
            metrics_row(&mut out, "ensemble", None, None, Some(split), name, v);
        }
    }
    metrics_row(&mut out, "ensemble", None, None, None, "models", report.ensemble_size as f64);
    out
}

pub fn evaluation_metrics_csv(report: &EvaluationReport) -> String {
    let mut out = String::from(METRICS_HEADER);
    for (seed, per_split) in &report.per_model {
        for (&split, m) in per_split {
            for (name, v) in m.entries() {
                metrics_row(&mut out, "model", Some(*seed), None, Some(split), name, v);
            }
        }
    }
    for (&split, m) in &report.ensemble {
        for (name, v) in m.entries() {
            metrics_row(&mut out, "ensemble", None, None, Some(split), name, v);
        }
    }
    metrics_row(&mut out, "ensemble", None, None, None, "models", report.per_model.len() as f64);
    out
}

/// A parameter tensor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDocument {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Model checkpoint. Tensors appear in the order of
/// [`Parameters::named_tensors`]: `embed.weight` (h × c), `embed.bias`,
/// `graphnorm.<k>.{scale,shift,mean_scale}` per view when enabled,
/// `head.weight` (T × V·h), `head.bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDocument {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    pub tensors: Vec<TensorDocument>,
}

impl CheckpointDocument {
    pub fn from_model(seed: u64, model: &ShallowModel) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            seed,
            tensors: model
                .params
                .named_tensors()
                .into_iter()
                .map(|(name, shape, data)| TensorDocument { name, shape, data: data.to_vec() })
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<(u64, ShallowModel)> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!("unsupported checkpoint {} v{}", self.format, self.version)));
        }
        self.config.validate()?;
        let mut params = Parameters::zeros(&self.config);
        let expected: Vec<(String, Vec<usize>)> =
            params.named_tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::DimensionMismatch(format!(
                "checkpoint has {} tensors, config implies {}",
                self.tensors.len(),
                expected.len()
            )));
        }
        let mut flat = Vec::with_capacity(params.len());
        for ((name, shape), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::DimensionMismatch(format!(
                    "tensor {} {:?} ({} values) does not match expected {name} {shape:?}",
                    t.name,
                    t.shape,
                    t.data.len()
                )));
            }
            flat.extend_from_slice(&t.data);
        }
        params.set_flat(&flat);
        Ok((self.seed, ShallowModel::with_params(self.config, params)?))
    }
}

pub fn checkpoint_file_name(seed: u64) -> String {
    format!("seed-{seed}.json")
}

/// Reads checkpoints from files or directories (every `*.json` inside,
/// except `run_record.json`), sorted by seed.
pub fn load_checkpoints(paths: &[PathBuf]) -> Result<Vec<(u64, ShallowModel)>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> =
                fs::read_dir(p)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
            inner.retain(|f| f.extension().is_some_and(|e| e == "json") && !f.ends_with("run_record.json"));
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    let mut models = files
        .iter()
        .map(|f| read_json::<CheckpointDocument>(f)?.into_model())
        .collect::<Result<Vec<_>>>()?;
    models.sort_by_key(|(seed, _)| *seed);
    Ok(models)
}
