//! Computes fixed-length fingerprints with every pooling operator and shows
//! that relabeling the nodes leaves them unchanged.
//!
//!     cargo run --example fingerprints

use graphwalk::features::{fingerprint, Pooling, PoolingSpec, ViewSelection};
use graphwalk::{AttributedGraph, ViewKind};
use ndarray::array;

fn main() -> graphwalk::Result<()> {
    let g = AttributedGraph::from_pairs(
        4,
        &[(0, 1), (1, 2), (2, 0), (2, 3)],
        array![[1.0, 0.2], [1.0, -0.1], [0.0, 0.4], [0.0, 1.0]],
    )?;
    let relabeled = g.permuted(&[3, 1, 0, 2])?;
    let sel = ViewSelection::new(&[ViewKind::Walk1, ViewKind::Walk2, ViewKind::WalkGamma], 0.1)?;
    for op in [Pooling::Mean, Pooling::Sum, Pooling::Max, Pooling::MeanScaledByMax] {
        let pools = PoolingSpec::uniform(op, &sel);
        let a = fingerprint("g", &g, &sel, &pools)?;
        let b = fingerprint("g", &relabeled, &sel, &pools)?;
        let drift = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let shown: Vec<String> = a.values.iter().map(|v| format!("{v:.4}")).collect();
        println!("{op:?}: [{}] (relabeling drift {drift:.1e})", shown.join(", "));
    }
    Ok(())
}
