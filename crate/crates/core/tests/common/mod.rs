//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use graphwalk::features::{fingerprint, Pooling, PoolingSpec, ViewSelection};
use graphwalk::model::train::{loss_and_gradients, Loss, Sample, TrainConfig};
use graphwalk::model::{Activation, ModelConfig, ModelSettings, ShallowModel, TaskKind};
use graphwalk::graph::{AttributedGraph, Edge};
use graphwalk::io::GraphDocument;
use graphwalk::pipeline::{DatasetManifest, GraphRecord, Split};
use graphwalk::ViewKind;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_features(rng: &mut impl Rng, n: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, c), |_| rng.gen_range(0.0..1.0))
}

/// Random spanning tree plus extra edges with probability `p`. Weights are
/// 1 or, when `weighted`, uniform in [0.2, 3).
pub fn random_connected(rng: &mut impl Rng, n: usize, p: f64, weighted: bool, c: usize) -> AttributedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut present = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    let mut add = |u: usize, v: usize, rng: &mut dyn rand::RngCore, edges: &mut Vec<Edge>| {
        if u == v || present[u][v] {
            return;
        }
        present[u][v] = true;
        present[v][u] = true;
        let w = if weighted { rng.gen_range(0.2..3.0) } else { 1.0 };
        edges.push(Edge::new(u, v, w));
    };
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        add(order[k], parent, rng, &mut edges);
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(p) {
                add(u, v, rng, &mut edges);
            }
        }
    }
    AttributedGraph::new(n, edges, uniform_features(rng, n, c)).expect("generated graph is valid")
}

/// Every simple graph on `n` labelled nodes, as edge bitmasks over the
/// pairs (i, j), i < j, in lexicographic order.
pub fn all_labelled_graphs(n: usize) -> impl Iterator<Item = Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let m = pairs.len();
    (0u64..(1u64 << m)).map(move |mask| (0..m).filter(|b| mask >> b & 1 == 1).map(|b| pairs[b]).collect())
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Eigenvalues of a symmetric matrix from nalgebra, ascending.
pub fn reference_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `U diag(f(λ)) Uᵀ` computed with nalgebra.
pub fn reference_matrix_function(a: &Array2<f64>, f: impl Fn(f64) -> f64) -> Array2<f64> {
    let n = a.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let eig = m.symmetric_eigen();
    let d = nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let r = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    Array2::from_shape_fn((n, n), |(i, j)| r[(i, j)])
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> Array2<f64> {
    let mut a = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
    a = &a + &a.t();
    a
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs_diff1(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A realizable regression task: the label is a fixed affine function of
/// the mean-pooled (x1, x2, xg) fingerprint.
pub struct SyntheticTask {
    pub graphs: Vec<AttributedGraph>,
    pub labels: Vec<f64>,
    pub splits: Vec<Split>,
}

pub const SYNTH_FEATURES: usize = 3;
pub const SYNTH_GAMMA: f64 = 0.5;
/// Label variance comes out near 0.017; a constant predictor scores ~170x
/// the train threshold.
pub const SYNTH_SCALE: f64 = 3.0;

pub fn synthetic_views() -> Vec<ViewKind> {
    vec![ViewKind::Walk1, ViewKind::Walk2, ViewKind::WalkGamma]
}

/// Model used on the synthetic task: identity activation keeps the
/// functional exactly realizable.
pub fn synthetic_settings() -> ModelSettings {
    ModelSettings {
        views: synthetic_views(),
        pooling: vec![Pooling::Mean],
        gamma: SYNTH_GAMMA,
        hidden_dim: 8,
        activation: Activation::Identity,
        graphnorm: false,
        task: TaskKind::Regression,
    }
}

pub fn synthetic_train_config() -> TrainConfig {
    TrainConfig { learning_rate: 0.01, epochs: 500, batch_size: 32, ..TrainConfig::default() }
}

pub fn synthetic_task(seed: u64, count: usize) -> SyntheticTask {
    let mut r = rng(seed);
    let sel = ViewSelection::new(&synthetic_views(), SYNTH_GAMMA).unwrap();
    let pools = PoolingSpec::uniform(Pooling::Mean, &sel);
    let width = sel.len() * SYNTH_FEATURES;
    let coef: Vec<f64> = (0..width).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut graphs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let n = r.gen_range(3..=8);
        let g = random_connected(&mut r, n, 0.4, false, SYNTH_FEATURES);
        let fp = fingerprint("g", &g, &sel, &pools).unwrap();
        labels.push(SYNTH_SCALE * fp.values.iter().zip(&coef).map(|(v, w)| v * w).sum::<f64>() + 0.1);
        graphs.push(g);
    }
    let splits = (0..count)
        .map(|i| match i % 10 {
            0 => Split::Valid,
            1 => Split::Test,
            _ => Split::Train,
        })
        .collect();
    SyntheticTask { graphs, labels, splits }
}


impl SyntheticTask {
    pub fn manifest(&self) -> DatasetManifest {
        let records = self
            .graphs
            .iter()
            .zip(&self.labels)
            .zip(&self.splits)
            .enumerate()
            .map(|(i, ((g, &y), &split))| GraphRecord {
                id: format!("g{i:03}"),
                graph: graphwalk::RawGraph {
                    node_count: g.node_count(),
                    edges: g.edges().to_vec(),
                    features: g.features().to_owned(),
                },
                labels: vec![Some(y)],
                split,
            })
            .collect();
        DatasetManifest::new(records, 1).unwrap()
    }

    /// JSON-lines manifest with inline graphs.
    pub fn manifest_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, ((g, &y), split)) in self.graphs.iter().zip(&self.labels).zip(&self.splits).enumerate() {
            let doc = GraphDocument::from_graph(&format!("g{i:03}"), g);
            let line = serde_json::json!({ "graph": doc, "label": [y], "split": split });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Brute-force ROC-AUC: fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

pub struct GradCase {
    pub model: ShallowModel,
    pub samples: Vec<Sample>,
    pub loss: Loss,
    pub description: String,
}

const ALL_ACTIVATIONS: [Activation; 4] = [Activation::Relu, Activation::Tanh, Activation::Sigmoid, Activation::Identity];
const ALL_POOLING: [Pooling; 4] = [Pooling::Mean, Pooling::Sum, Pooling::Max, Pooling::MeanScaledByMax];

/// Configurations `k = 0..16` cover every (activation, GraphNorm, loss)
/// combination; sizes and pooling come from the seeded generator.
pub fn gradient_case(seed: u64, k: usize) -> GradCase {
    let mut r = rng(seed.wrapping_mul(1_000_003).wrapping_add(k as u64));
    let activation = ALL_ACTIVATIONS[k % 4];
    let graphnorm = (k / 4) % 2 == 1;
    let loss = if (k / 8) % 2 == 0 { Loss::Mse } else { Loss::BceWithLogits };
    let task = if loss == Loss::Mse { TaskKind::Regression } else { TaskKind::BinaryClassification };
    let mut views = ViewKind::ALL.to_vec();
    views.shuffle(&mut r);
    views.truncate(r.gen_range(1..=4));
    let pooling: Vec<Pooling> = views.iter().map(|_| ALL_POOLING[r.gen_range(0..4)]).collect();
    let h = r.gen_range(1..=8);
    let c = r.gen_range(1..=4);
    let tasks = r.gen_range(1..=3);
    let settings = ModelSettings { views: views.clone(), pooling: pooling.clone(), gamma: 0.1, hidden_dim: h, activation, graphnorm, task };
    let cfg = ModelConfig::new(settings, c, tasks).unwrap();
    let mut model = ShallowModel::new(cfg, seed).unwrap();
    let flat: Vec<f64> = (0..model.params.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    model.params.set_flat(&flat);
    let samples = (0..3)
        .map(|_| {
            let n = r.gen_range(1..=6);
            let features = views.iter().map(|_| Array2::from_shape_fn((n, c), |_| r.gen_range(-1.5..1.5))).collect();
            let labels = (0..tasks)
                .map(|_| {
                    if r.gen_bool(0.15) {
                        None
                    } else if task == TaskKind::Regression {
                        Some(r.gen_range(-1.0..1.0))
                    } else {
                        Some(if r.gen_bool(0.5) { 1.0 } else { 0.0 })
                    }
                })
                .collect();
            Sample { features, labels }
        })
        .collect();
    let description = format!("{activation:?} graphnorm={graphnorm} {loss:?} h={h} c={c} T={tasks} views={views:?} pooling={pooling:?}");
    GradCase { model, samples, loss, description }
}

pub const GRAD_STEP: f64 = 1e-5;

/// Largest relative error `|a − f| / max(|a|, |f|, 1e-6)` between analytic
/// and central-difference gradients over every parameter.
pub fn gradient_check(case: &GradCase) -> f64 {
    let batch: Vec<&Sample> = case.samples.iter().collect();
    let (_, grad) = loss_and_gradients(&batch, &case.model, case.loss).unwrap();
    let analytic = grad.to_flat();
    let base = case.model.params.to_flat();
    let mut probe = case.model.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut at = |delta: f64| {
            let mut p = base.clone();
            p[i] += delta;
            probe.params.set_flat(&p);
            loss_and_gradients(&batch, &probe, case.loss).unwrap().0
        };
        let fd = (at(GRAD_STEP) - at(-GRAD_STEP)) / (2.0 * GRAD_STEP);
        let a = analytic[i];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
