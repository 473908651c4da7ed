//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits nonzero if any criterion fails.

mod common;

use common::{
    all_labelled_graphs, gradient_case, gradient_check, max_abs_diff, max_abs_diff1, pairwise_auc, random_connected,
    random_permutation, random_symmetric, rng, synthetic_settings, synthetic_task, synthetic_train_config, synthetic_views,
    SYNTH_GAMMA,
};
use graphwalk::features::{fingerprint, Pooling, PoolingSpec, ViewSelection, Vocabulary};
use graphwalk::graph::{
    degrees, detailed_balance_violation, is_connected, laplacian, stationarity_residual, transition_matrix,
};
use graphwalk::io::read_graph_document;
use graphwalk::model::metrics::{mae, r2, rmse, roc_auc};
use graphwalk::model::train::TrainConfig;
use graphwalk::pipeline::{process_dataset, run_experiment, ExperimentConfig, Split};
use graphwalk::repair::{repair, RepairReason};
use graphwalk::spectral::{eigh, fractional_laplacian, gamma_adjacency, gamma_stationary};
use graphwalk::walks::{count_walks_bruteforce, walk1_view, walk2_view, walk_gamma_view, WalkView};
use graphwalk::{AttributedGraph, ViewKind};
use ndarray::{array, Array2};
use rand::Rng;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture_graph(name: &str) -> AttributedGraph {
    let doc = read_graph_document(&fixtures().join("graphs").join(format!("{name}.json"))).unwrap();
    AttributedGraph::try_from(doc.to_raw(&Vocabulary::default()).unwrap()).unwrap()
}

/// Fixtures after repair, plus a few random weighted graphs.
fn test_graphs() -> Vec<(String, AttributedGraph)> {
    let mut out: Vec<(String, AttributedGraph)> = ["p3", "k3", "disconnected4"]
        .iter()
        .map(|name| (name.to_string(), repair(&fixture_graph(name)).unwrap().0))
        .collect();
    let mut r = rng(700);
    for i in 0..4 {
        let n = r.gen_range(5..=10);
        out.push((format!("random{i}"), random_connected(&mut r, n, 0.35, true, 3)));
    }
    out
}

fn stationarity() -> Outcome {
    let mut r = rng(101);
    let (mut worst_res, mut worst_bal) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = r.gen_range(2..=16);
        let weighted = r.gen_bool(0.5);
        let g = random_connected(&mut r, n, 0.3, weighted, 1);
        let v = walk1_view(&g).map_err(|e| e.to_string())?;
        let m = transition_matrix(g.adjacency(), &degrees(&g)).map_err(|e| e.to_string())?;
        worst_res = worst_res.max(stationarity_residual(g.adjacency(), v.stationary.view()));
        worst_bal = worst_bal.max(detailed_balance_violation(&m, v.stationary.view()));
    }
    ensure!(worst_res < 1e-10, "stationarity residual {worst_res:e}");
    ensure!(worst_bal < 1e-12, "detailed balance violation {worst_bal:e}");
    Ok(format!("200 graphs, residual {worst_res:.1e}, balance {worst_bal:.1e}"))
}

fn walk_counts() -> Outcome {
    // views are only built after repair, which guarantees n >= 3
    let mut checked = 0usize;
    for n in 3..=6 {
        for pairs in all_labelled_graphs(n) {
            let g = AttributedGraph::from_pairs(n, &pairs, Array2::ones((n, 1))).unwrap();
            if !is_connected(&g) {
                continue;
            }
            let a2 = walk2_view(&g).map_err(|e| e.to_string())?.adjacency;
            for i in 0..n {
                ensure!(a2[[i, i]] == 0.0, "nonzero diagonal on {pairs:?}");
                for j in (0..n).filter(|&j| j != i) {
                    let want = count_walks_bruteforce(&g, 2, i, j).map_err(|e| e.to_string())?;
                    ensure!(a2[[i, j]] == want, "({i},{j}) on {pairs:?}: {} != {want}", a2[[i, j]]);
                }
            }
            checked += 1;
        }
    }
    // connected labelled graphs on 3..=6 nodes: 4 + 38 + 728 + 26704
    ensure!(checked == 27474, "expected 27474 connected graphs, saw {checked}");
    Ok(format!("{checked} connected labelled graphs, n = 3..6"))
}

fn spectral() -> Outcome {
    let mut r = rng(303);
    let mut worst_rec = 0.0f64;
    for _ in 0..100 {
        let n = r.gen_range(1..=32);
        let a = random_symmetric(&mut r, n);
        let dec = eigh(a.view()).map_err(|e| e.to_string())?;
        worst_rec = worst_rec.max(max_abs_diff(&dec.reconstruct(), &a));
    }
    ensure!(worst_rec < 1e-8, "reconstruction error {worst_rec:e}");

    let p3 = AttributedGraph::from_pairs(3, &[(0, 1), (1, 2)], Array2::ones((3, 1))).unwrap();
    let spectrum = eigh(laplacian(&p3).as_array().view()).map_err(|e| e.to_string())?.eigenvalues;
    let p3_err = max_abs_diff1(&spectrum, &array![0.0, 1.0, 3.0]);
    ensure!(p3_err < 1e-8, "P3 spectrum {spectrum}");

    let k3 = fixture_graph("k3");
    let l = laplacian(&k3);
    let fl = fractional_laplacian(&l, 0.1).map_err(|e| e.to_string())?;
    let k3_err = max_abs_diff(fl.matrix(), &(l.as_array() * 3f64.powf(-0.9)));
    ensure!(k3_err < 1e-8, "K3 L^0.1 error {k3_err:e}");

    let mut worst_semi = 0.0f64;
    for _ in 0..50 {
        let n = r.gen_range(2..=16);
        let weighted = r.gen_bool(0.5);
        let g = random_connected(&mut r, n, 0.3, weighted, 1);
        let l = laplacian(&g);
        let half = fractional_laplacian(&l, 0.5).map_err(|e| e.to_string())?;
        worst_semi = worst_semi.max(max_abs_diff(&half.matrix().dot(half.matrix()), l.as_array()));
    }
    ensure!(worst_semi < 1e-7, "semigroup error {worst_semi:e}");
    Ok(format!("reconstruction {worst_rec:.1e}, P3 {p3_err:.1e}, K3 {k3_err:.1e}, semigroup {worst_semi:.1e}"))
}

fn gamma_one() -> Outcome {
    let mut graphs = test_graphs();
    let mut r = rng(404);
    for i in 0..100 {
        let n = r.gen_range(2..=16);
        let weighted = r.gen_bool(0.5);
        graphs.push((format!("r{i}"), random_connected(&mut r, n, 0.3, weighted, 1)));
    }
    let (mut worst_a, mut worst_pi) = (0.0f64, 0.0f64);
    for (id, g) in &graphs {
        let one = walk_gamma_view(g, 1.0).map_err(|e| format!("{id}: {e}"))?;
        let w1 = walk1_view(g).map_err(|e| format!("{id}: {e}"))?;
        worst_a = worst_a.max(max_abs_diff(&one.adjacency, &g.adjacency().to_owned()));
        worst_pi = worst_pi.max(max_abs_diff1(&one.stationary, &w1.stationary));
    }
    ensure!(worst_a < 1e-9, "A_1 differs from A by {worst_a:e}");
    ensure!(worst_pi < 1e-10, "pi_1 differs by {worst_pi:e}");
    Ok(format!("{} graphs, adjacency {worst_a:.1e}, stationary {worst_pi:.1e}", graphs.len()))
}

fn fractional_stationarity() -> Outcome {
    let mut r = rng(505);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = r.gen_range(2..=16);
        let weighted = r.gen_bool(0.5);
        let g = random_connected(&mut r, n, 0.3, weighted, 1);
        let l = laplacian(&g);
        for gamma in [0.1, 0.5, 0.9] {
            let fl = fractional_laplacian(&l, gamma).map_err(|e| e.to_string())?;
            let a = gamma_adjacency(&fl).map_err(|e| e.to_string())?;
            let pi = gamma_stationary(&fl).map_err(|e| e.to_string())?;
            worst = worst.max(stationarity_residual(a.view(), pi.view()));
        }
    }
    ensure!(worst < 1e-9, "residual {worst:e}");
    Ok(format!("100 graphs x 3 exponents, residual {worst:.1e}"))
}

fn repair_fixtures() -> Outcome {
    let two = AttributedGraph::from_pairs(2, &[(0, 1)], array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
    let one = AttributedGraph::from_pairs(1, &[], array![[5.0, 6.0]]).unwrap();
    let cases = [
        ("disconnected4", fixture_graph("disconnected4"), RepairReason::Disconnected, 5),
        ("two-node", two, RepairReason::TwoNode, 3),
        ("single-node", one, RepairReason::SingleNode, 3),
    ];
    for (name, g, reason, n_out) in cases {
        let n = g.node_count();
        let (r, record) = repair(&g).map_err(|e| e.to_string())?;
        ensure!(record.reason == reason, "{name}: reason {:?}", record.reason);
        ensure!(record.original_node_count == n, "{name}: original count {}", record.original_node_count);
        ensure!(record.added_nodes == (n..n_out).collect::<Vec<_>>(), "{name}: added {:?}", record.added_nodes);
        ensure!(r.node_count() == n_out && is_connected(&r), "{name}: not a connected graph on {n_out} nodes");
        ensure!(g.edges().iter().all(|e| r.edges().contains(e)), "{name}: original edge lost");
        for i in 0..n {
            ensure!(r.features().row(i) == g.features().row(i), "{name}: feature row {i} changed");
        }
        for i in n..n_out {
            ensure!(r.features().row(i).iter().all(|&x| x == 0.0), "{name}: added node {i} has features");
        }
        let (again, second) = repair(&r).map_err(|e| e.to_string())?;
        ensure!(again == r && second.reason == RepairReason::None, "{name}: repair not idempotent");
    }
    Ok("disconnected, two-node, single-node".into())
}

fn equivariance_error(a: &WalkView, b: &WalkView, perm: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..perm.len() {
        worst = worst.max((a.stationary[i] - b.stationary[perm[i]]).abs());
        for j in 0..perm.len() {
            worst = worst.max((a.adjacency[[i, j]] - b.adjacency[[perm[i], perm[j]]]).abs());
        }
        for c in 0..a.scaled_features.ncols() {
            worst = worst.max((a.scaled_features[[i, c]] - b.scaled_features[[perm[i], c]]).abs());
        }
    }
    worst
}

fn permutations() -> Outcome {
    let mut r = rng(707);
    let sel = ViewSelection::new(&ViewKind::ALL, 0.1).unwrap();
    let (mut worst_view, mut worst_fp) = (0.0f64, 0.0f64);
    let graphs = test_graphs();
    for (id, g) in &graphs {
        let views = |g: &AttributedGraph| -> Result<Vec<WalkView>, String> {
            Ok(vec![
                walk1_view(g).map_err(|e| e.to_string())?,
                walk2_view(g).map_err(|e| e.to_string())?,
                walk_gamma_view(g, 0.1).map_err(|e| e.to_string())?,
            ])
        };
        let base = views(g)?;
        for _ in 0..20 {
            let perm = random_permutation(&mut r, g.node_count());
            let h = g.permuted(&perm).map_err(|e| e.to_string())?;
            for (a, b) in base.iter().zip(views(&h)?) {
                worst_view = worst_view.max(equivariance_error(a, &b, &perm));
            }
            for op in [Pooling::Mean, Pooling::Sum, Pooling::Max, Pooling::MeanScaledByMax] {
                let pools = PoolingSpec::uniform(op, &sel);
                let fa = fingerprint(id, g, &sel, &pools).map_err(|e| e.to_string())?;
                let fb = fingerprint(id, &h, &sel, &pools).map_err(|e| e.to_string())?;
                for (x, y) in fa.values.iter().zip(&fb.values) {
                    worst_fp = worst_fp.max((x - y).abs());
                }
            }
        }
    }
    ensure!(worst_view <= 1e-12, "view equivariance error {worst_view:e}");
    ensure!(worst_fp <= 1e-12, "fingerprint invariance error {worst_fp:e}");
    Ok(format!("{} graphs x 20 relabelings, views {worst_view:.1e}, fingerprints {worst_fp:.1e}", graphs.len()))
}

fn gradients() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..20 {
        let case = gradient_case(2024, k);
        let err = gradient_check(&case);
        ensure!(err < 1e-4, "config {k} ({}): relative error {err:e}", case.description);
        worst = worst.max(err);
    }
    Ok(format!("20 configurations, worst relative error {worst:.1e}"))
}

fn end_to_end() -> Outcome {
    let task = synthetic_task(2024, 200);
    let store = process_dataset(&task.manifest(), SYNTH_GAMMA, &synthetic_views()).map_err(|e| e.to_string())?;
    ensure!(store.failures.is_empty(), "processing failures {:?}", store.failures);
    let exp = run_experiment(&store, &synthetic_settings(), &synthetic_train_config(), 0, 3).map_err(|e| e.to_string())?;
    ensure!(exp.report.failures.is_empty(), "seed failures {:?}", exp.report.failures);
    let mut worst = [0.0f64; 2];
    for run in &exp.report.runs {
        let (tr, va) = (run.final_metrics[&Split::Train].loss, run.final_metrics[&Split::Valid].loss);
        ensure!(tr < 1e-4, "seed {}: train MSE {tr:e}", run.seed);
        ensure!(va < 1e-3, "seed {}: validation MSE {va:e}", run.seed);
        worst = [worst[0].max(tr), worst[1].max(va)];
    }
    for (split, summary) in &exp.report.summary {
        let max_seed = exp.report.runs.iter().map(|r| r.final_metrics[split].loss).fold(0.0, f64::max);
        ensure!(summary.ensemble.loss <= max_seed, "{split}: ensemble MSE {} > max seed {max_seed}", summary.ensemble.loss);
    }
    let ens = exp.report.summary[&Split::Train].ensemble.loss;
    Ok(format!("worst seed train {:.1e}, valid {:.1e}, ensemble train {ens:.1e}", worst[0], worst[1]))
}

fn graphwalk(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_graphwalk"))
        .args(args)
        .env_remove("GRAPHWALK_OUT_DIR")
        .output()
        .map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = dir.path().join("manifest.jsonl");
    std::fs::write(&manifest, synthetic_task(5, 40).manifest_jsonl()).map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    let cfg = ExperimentConfig {
        model: synthetic_settings(),
        train: TrainConfig { epochs: 30, batch_size: 8, ..TrainConfig::default() },
    };
    std::fs::write(&config, serde_json::to_string_pretty(&cfg).unwrap()).map_err(|e| e.to_string())?;
    let p = |x: &Path| x.to_str().unwrap().to_owned();

    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let ckpt = dir.path().join(name);
        let metrics = dir.path().join(format!("{name}.csv"));
        let out = graphwalk(&[
            "train", "--manifest", &p(&manifest), "--config", &p(&config), "--seeds", "3", "--checkpoint-out", &p(&ckpt),
            "--metrics-out", &p(&metrics),
        ])?;
        ensure!(out.status.code() == Some(0), "train exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
        runs.push((ckpt, metrics));
    }
    let read = |x: &Path| std::fs::read(x).map_err(|e| format!("{}: {e}", x.display()));
    ensure!(read(&runs[0].1)? == read(&runs[1].1)?, "metrics differ between runs");
    for seed in 0..3 {
        let name = format!("seed-{seed}.json");
        ensure!(read(&runs[0].0.join(&name))? == read(&runs[1].0.join(&name))?, "{name} differs between runs");
    }

    let ok = graphwalk(&["check", "--input", &p(&fixtures().join("graphs"))])?;
    ensure!(ok.status.code() == Some(0), "check on fixtures exited {:?}", ok.status.code());
    let bad = graphwalk(&["check", "--input", &p(&fixtures().join("negative"))])?;
    ensure!(bad.status.code() == Some(3), "check on negative control exited {:?}", bad.status.code());
    Ok("metrics and 3 checkpoints byte-identical; check exits 0 and 3".into())
}

fn metrics() -> Outcome {
    let mut r = rng(1111);
    let mut worst = 0.0f64;
    for round in 0..100 {
        let coarse = round % 2 == 0;
        let scores: Vec<f64> =
            (0..50).map(|_| if coarse { r.gen_range(0..6) as f64 } else { r.gen_range(-2.0..2.0) }).collect();
        let mut labels: Vec<bool> = (0..50).map(|_| r.gen_bool(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        let got = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((got - pairwise_auc(&scores, &labels)).abs());
    }
    ensure!(worst < 1e-12, "ROC-AUC differs from pairwise count by {worst:e}");

    let pred = [1.0, 2.0, 3.0, 4.0, 5.0];
    let target = [1.5, 2.0, 2.5, 5.0, 4.0];
    // residuals 0.5, 0, 0.5, 1, 1; target mean 3, SS_tot 8.5, SS_res 2.5
    let checks = [
        ("MAE", mae(&pred, &target), 0.6),
        ("RMSE", rmse(&pred, &target), 0.5f64.sqrt()),
        ("R2", r2(&pred, &target), 12.0 / 17.0),
    ];
    for (name, got, want) in checks {
        ensure!((got - want).abs() < 1e-12, "{name} {got} != {want}");
    }
    Ok(format!("100 sets of 50 samples, AUC error {worst:.1e}; 5-sample fixture exact"))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "stationarity and detailed balance", limit: Some(secs(5)), run: stationarity },
        Criterion { id: 2, name: "length-2 walk counts", limit: Some(secs(30)), run: walk_counts },
        Criterion { id: 3, name: "spectral correctness", limit: Some(secs(10)), run: spectral },
        Criterion { id: 4, name: "gamma = 1 consistency", limit: None, run: gamma_one },
        Criterion { id: 5, name: "fractional stationarity", limit: None, run: fractional_stationarity },
        Criterion { id: 6, name: "repair", limit: None, run: repair_fixtures },
        Criterion { id: 7, name: "permutation properties", limit: None, run: permutations },
        Criterion { id: 8, name: "gradient check", limit: Some(secs(30)), run: gradients },
        Criterion { id: 9, name: "end-to-end synthetic task", limit: Some(secs(60)), run: end_to_end },
        Criterion { id: 10, name: "determinism and check exit codes", limit: None, run: determinism },
        Criterion { id: 11, name: "metric correctness", limit: None, run: metrics },
    ];
    let mut failed = 0;
    for c in criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {:>2}  {:<34} {detail} ({:.2?})", c.id, c.name, elapsed),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}  {:<34} {why} ({:.2?})", c.id, c.name, elapsed);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 11 criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all 11 criteria passed");
        ExitCode::SUCCESS
    }
}
