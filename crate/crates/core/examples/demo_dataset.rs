//! Writes a small dataset for trying the command-line tool: one JSON file
//! per graph, a manifest and a training config.
//!
//!     cargo run --example demo_dataset -- demo
//!     graphwalk train --manifest demo/manifest.jsonl --config demo/config.json --seeds 3 --checkpoint-out demo/ckpt

use graphwalk::features::Pooling;
use graphwalk::graph::Edge;
use graphwalk::io::{write_json, GraphDocument};
use graphwalk::model::train::TrainConfig;
use graphwalk::model::{Activation, ModelSettings, TaskKind};
use graphwalk::pipeline::ExperimentConfig;
use graphwalk::{AttributedGraph, ViewKind};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::PathBuf;

fn main() -> graphwalk::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut manifest = Vec::new();
    for i in 0..60 {
        let n = rng.gen_range(3..=9);
        let mut edges: Vec<Edge> = (1..n).map(|v| Edge::unit(rng.gen_range(0..v), v)).collect();
        if n > 3 && rng.gen_bool(0.5) {
            // close a ring
            edges.push(Edge::unit(0, n - 1));
        }
        edges.sort_by_key(|e| (e.u.min(e.v), e.u.max(e.v)));
        edges.dedup_by_key(|e| (e.u.min(e.v), e.u.max(e.v)));
        let g = AttributedGraph::new(n, edges, Array2::from_shape_fn((n, 2), |_| rng.gen_range(0.0..1.0)))?;
        let id = format!("mol{i:02}");
        write_json(&dir.join("graphs").join(format!("{id}.json")), &GraphDocument::from_graph(&id, &g))?;
        // size-and-feature driven target, so there is something to learn
        let label = g.features().column(0).sum() / n as f64 + 0.1 * g.edges().len() as f64;
        let split = ["train", "train", "train", "valid", "test"][i % 5];
        manifest.push(serde_json::json!({ "graph": format!("graphs/{id}.json"), "label": [label], "split": split }));
    }
    let mut text = Vec::new();
    for line in &manifest {
        writeln!(text, "{line}")?;
    }
    graphwalk::io::atomic_write(&dir.join("manifest.jsonl"), &text)?;

    let config = ExperimentConfig {
        model: ModelSettings {
            views: vec![ViewKind::Walk1, ViewKind::Walk2, ViewKind::WalkGamma],
            pooling: vec![Pooling::Mean, Pooling::Max, Pooling::MeanScaledByMax],
            gamma: 0.1,
            hidden_dim: 16,
            activation: Activation::Tanh,
            graphnorm: true,
            task: TaskKind::Regression,
        },
        train: TrainConfig { epochs: 100, ..TrainConfig::default() },
    };
    write_json(&dir.join("config.json"), &config)?;
    println!("wrote {} graphs, manifest.jsonl and config.json to {}", manifest.len(), dir.display());
    Ok(())
}
