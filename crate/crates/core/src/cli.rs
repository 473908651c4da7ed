//! Command-line front end. Exit codes: 0 ok, 1 fatal, 2 partial per-graph
//! or per-seed failure, 3 invariant failure (`check`).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::check::{check_bundle, check_graph, CheckOutcome};
use crate::error::{Error, Result};
use crate::features::{fingerprint_bundle, Pooling, PoolingSpec, ViewSelection};
use crate::io::{
    atomic_write, bundle_file_name, checkpoint_file_name, evaluation_metrics_csv, experiment_metrics_csv,
    fingerprints_csv, load_checkpoints, load_graphs, load_manifest, read_json, write_json, write_json_compact, BundleDocument,
    CheckpointDocument, LoadedDataset,
};
use crate::pipeline::{evaluate_models, process_dataset, run_experiment, ExperimentConfig, ExperimentReport, GraphFailure, SeedFailure};
use crate::repair::repair;
use crate::spectral::DEFAULT_GAMMA;
use crate::walks::ViewKind;
use crate::AttributedGraph;

/// Relative output paths are resolved against this directory when set.
pub const OUT_DIR_ENV: &str = "GRAPHWALK_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "graphwalk", version, about = "Random-walk views, fingerprints and shallow models for attributed graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repair graphs and write one bundle file per graph with its walk views.
    Process(ProcessArgs),
    /// Write pooled view fingerprints as CSV.
    Fingerprint(FingerprintArgs),
    /// Train one or more seeds and write checkpoints, a run record and metrics.
    Train(TrainArgs),
    /// Score checkpoints on a manifest.
    Eval(EvalArgs),
    /// Run the numerical invariant suite on graphs or bundles.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    /// Graph file, directory of graph files, or .jsonl manifest.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving <id>.bundle.json files.
    #[arg(long)]
    pub output: PathBuf,
    /// Fractional exponent, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Walk views to build (x1, x2, xg).
    #[arg(long, value_delimiter = ',', default_value = "x1,x2,xg")]
    pub views: Vec<ViewKind>,
}

#[derive(Debug, Args)]
pub struct FingerprintArgs {
    /// Graph file, directory of graph files, or .jsonl manifest.
    #[arg(long)]
    pub input: PathBuf,
    /// CSV file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Views to pool (x, x1, x2, xg).
    #[arg(long, value_delimiter = ',', default_value = "x1,x2,xg")]
    pub views: Vec<ViewKind>,
    /// One pooling operator for all views, or one per view
    /// (mean, sum, max, mean_scaled_by_max).
    #[arg(long, value_delimiter = ',', default_value = "mean")]
    pub pooling: Vec<Pooling>,
    /// Fractional exponent, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON-lines manifest with labels and splits.
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSON file with "model" and "train" sections.
    #[arg(long)]
    pub config: PathBuf,
    /// First seed; defaults to the config's train.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds to train.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Directory receiving seed-<s>.json checkpoints.
    #[arg(long)]
    pub checkpoint_out: Option<PathBuf>,
    /// Long-format metrics CSV; printed to stdout when omitted.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    /// Run record JSON; defaults to run_record.json in the checkpoint directory.
    #[arg(long)]
    pub run_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSON-lines manifest with labels and splits.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Checkpoint files or directories.
    #[arg(long, required = true, num_args = 1..)]
    pub checkpoint_in: Vec<PathBuf>,
    /// Optional config; its model section must match the checkpoints.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Long-format metrics CSV; printed to stdout when omitted.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Graph file, bundle file, directory, or .jsonl manifest.
    #[arg(long)]
    pub input: PathBuf,
    /// Fractional exponent used by the fractional checks.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Process(a) => cmd_process(&a),
        Command::Fingerprint(a) => cmd_fingerprint(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Check(a) => cmd_check(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            EXIT_FATAL
        }
    }
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    graph_failures: &'a [GraphFailure],
    #[serde(skip_serializing_if = "<[SeedFailure]>::is_empty")]
    seed_failures: &'a [SeedFailure],
}

fn report_failures(graphs: &[GraphFailure], seeds: &[SeedFailure]) {
    for f in graphs {
        eprintln!("error[{}]: graph {}: {}", f.code, f.id, f.message);
    }
    for f in seeds {
        eprintln!("error[{}]: seed {}: {}", f.code, f.seed, f.message);
    }
    if let Ok(json) = serde_json::to_string(&ErrorReport { graph_failures: graphs, seed_failures: seeds }) {
        eprintln!("{json}");
    }
}

fn all_failures(loaded: &LoadedDataset, processed: &[GraphFailure]) -> Vec<GraphFailure> {
    loaded.failures.iter().chain(processed).cloned().collect()
}

fn cmd_process(a: &ProcessArgs) -> Result<i32> {
    crate::spectral::check_gamma(a.gamma)?;
    let loaded = load_graphs(&a.input)?;
    let store = process_dataset(&loaded.manifest, a.gamma, &a.views)?;
    let dir = out_path(&a.output);
    for g in &store.graphs {
        write_json_compact(&dir.join(bundle_file_name(&g.id)), &BundleDocument::from_processed(g, a.gamma))?;
    }
    let failures = all_failures(&loaded, &store.failures);
    println!("wrote {} bundles to {}", store.graphs.len(), dir.display());
    if failures.is_empty() {
        return Ok(EXIT_OK);
    }
    write_json(&dir.join("errors.json"), &failures)?;
    report_failures(&failures, &[]);
    Ok(EXIT_PARTIAL)
}

fn cmd_fingerprint(a: &FingerprintArgs) -> Result<i32> {
    let sel = ViewSelection::new(&a.views, a.gamma)?;
    crate::spectral::check_gamma(a.gamma)?;
    let pools = if a.pooling.len() == 1 {
        PoolingSpec::uniform(a.pooling[0], &sel)
    } else {
        if a.pooling.len() != a.views.len() {
            return Err(Error::InvalidConfig(format!("{} pooling operators for {} views", a.pooling.len(), a.views.len())));
        }
        let mut pairs: Vec<_> = a.views.iter().copied().zip(a.pooling.iter().copied()).collect();
        pairs.sort_by_key(|p| p.0);
        PoolingSpec::new(pairs.into_iter().map(|p| p.1).collect(), &sel)?
    };
    let loaded = load_graphs(&a.input)?;
    let store = process_dataset(&loaded.manifest, a.gamma, sel.kinds())?;
    let fps = store
        .graphs
        .iter()
        .map(|g| fingerprint_bundle(&g.id, &g.bundle, &sel, &pools))
        .collect::<Result<Vec<_>>>()?;
    atomic_write(&out_path(&a.output), fingerprints_csv(&fps)?.as_bytes())?;
    let failures = all_failures(&loaded, &store.failures);
    if failures.is_empty() {
        return Ok(EXIT_OK);
    }
    report_failures(&failures, &[]);
    Ok(EXIT_PARTIAL)
}

fn emit_csv(path: Option<&PathBuf>, csv: &str) -> Result<()> {
    match path {
        Some(p) => atomic_write(&out_path(p), csv.as_bytes()),
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct RunRecordFile<'a> {
    config: &'a ExperimentConfig,
    seed0: u64,
    graph_failures: &'a [GraphFailure],
    #[serde(flatten)]
    report: &'a ExperimentReport,
}

fn cmd_train(a: &TrainArgs) -> Result<i32> {
    let config: ExperimentConfig = read_json(&a.config)?;
    let loaded = load_manifest(&a.manifest)?;
    let views: Vec<ViewKind> = config.model.views.iter().copied().filter(|k| *k != ViewKind::Raw).collect();
    let gamma = config.model.gamma;
    let store = process_dataset(&loaded.manifest, gamma, &views_or_raw(&views))?;
    let seed0 = a.seed.unwrap_or(config.train.seed);
    let exp = run_experiment(&store, &config.model, &config.train, seed0, a.seeds)?;
    if let Some(dir) = &a.checkpoint_out {
        let dir = out_path(dir);
        for (seed, model) in &exp.models {
            write_json_compact(&dir.join(checkpoint_file_name(*seed)), &CheckpointDocument::from_model(*seed, model))?;
        }
    }
    let graph_failures = all_failures(&loaded, &store.failures);
    let record = RunRecordFile { config: &config, seed0, graph_failures: &graph_failures, report: &exp.report };
    let run_out = a.run_out.clone().or_else(|| a.checkpoint_out.as_ref().map(|d| d.join("run_record.json")));
    if let Some(p) = run_out {
        write_json(&out_path(&p), &record)?;
    }
    emit_csv(a.metrics_out.as_ref(), &experiment_metrics_csv(&exp.report))?;
    if exp.models.is_empty() {
        report_failures(&graph_failures, &exp.report.failures);
        return Err(Error::InvalidConfig("every seed failed".into()));
    }
    if graph_failures.is_empty() && exp.report.failures.is_empty() {
        return Ok(EXIT_OK);
    }
    report_failures(&graph_failures, &exp.report.failures);
    Ok(EXIT_PARTIAL)
}

/// The view selection must be non-empty even for raw-only models.
fn views_or_raw(views: &[ViewKind]) -> Vec<ViewKind> {
    if views.is_empty() {
        vec![ViewKind::Raw]
    } else {
        views.to_vec()
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let models = load_checkpoints(&a.checkpoint_in)?;
    let (_, first) = models.first().ok_or(Error::EmptyEnsemble)?;
    let settings = first.config.settings.clone();
    if let Some(path) = &a.config {
        let config: ExperimentConfig = read_json(path)?;
        if config.model != settings {
            return Err(Error::DimensionMismatch("config model section differs from the checkpoint".into()));
        }
    }
    let loaded = load_manifest(&a.manifest)?;
    let views: Vec<ViewKind> = settings.views.iter().copied().filter(|k| *k != ViewKind::Raw).collect();
    let store = process_dataset(&loaded.manifest, settings.gamma, &views_or_raw(&views))?;
    let report = evaluate_models(&store, &models)?;
    emit_csv(a.metrics_out.as_ref(), &evaluation_metrics_csv(&report))?;
    let failures = all_failures(&loaded, &store.failures);
    if failures.is_empty() {
        return Ok(EXIT_OK);
    }
    report_failures(&failures, &[]);
    Ok(EXIT_PARTIAL)
}

fn is_bundle(path: &Path) -> bool {
    path.file_name().is_some_and(|n| n.to_string_lossy().ends_with(".bundle.json"))
        || std::fs::read_to_string(path)
            .ok()
            .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
            .is_some_and(|v| v.get("views").is_some())
}

fn cmd_check(a: &CheckArgs) -> Result<i32> {
    crate::spectral::check_gamma(a.gamma)?;
    let mut outcomes: Vec<CheckOutcome> = Vec::new();
    let mut bundle_files = Vec::new();
    let graph_input = if a.input.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&a.input)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        bundle_files.extend(entries.into_iter().filter(|p| p.is_file() && p.to_string_lossy().ends_with(".bundle.json")));
        true
    } else if a.input.extension().is_some_and(|e| e == "json") && is_bundle(&a.input) {
        bundle_files.push(a.input.clone());
        false
    } else {
        true
    };
    if graph_input {
        let loaded = load_graphs(&a.input)?;
        if let Some(f) = loaded.failures.first() {
            return Err(Error::Parse(format!("graph {}: {}", f.id, f.message)));
        }
        for r in &loaded.manifest.records {
            let g = AttributedGraph::try_from(r.graph.clone())?;
            let (repaired, _) = repair(&g)?;
            outcomes.extend(check_graph(&r.id, &repaired, a.gamma));
        }
    }
    for f in &bundle_files {
        outcomes.extend(check_bundle(&read_json::<BundleDocument>(f)?));
    }
    print_table(&outcomes);
    let failed: Vec<&CheckOutcome> = outcomes.iter().filter(|o| !o.passed).collect();
    if failed.is_empty() {
        return Ok(EXIT_OK);
    }
    for o in failed {
        eprintln!("invariant failed: graph {} check {} value {} > {}", o.graph_id, o.check, o.value, o.threshold);
    }
    Ok(EXIT_INVARIANT)
}

fn print_table(outcomes: &[CheckOutcome]) {
    let idw = outcomes.iter().map(|o| o.graph_id.len()).max().unwrap_or(0).max(5);
    let cw = outcomes.iter().map(|o| o.check.len()).max().unwrap_or(0).max(5);
    println!("{:idw$}  {:cw$}  {:>12}  {:>9}  status", "graph", "check", "value", "threshold");
    for o in outcomes {
        println!(
            "{:idw$}  {:cw$}  {:>12.3e}  {:>9.0e}  {}",
            o.graph_id,
            o.check,
            o.value,
            o.threshold,
            if o.passed { "ok" } else { "FAIL" }
        );
    }
}
