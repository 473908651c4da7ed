//! Builds the one-step, two-step and fractional walk views of a small
//! molecule-like graph and prints each adjacency and stationary distribution.
//!
//!     cargo run --example walk_views

use graphwalk::walks::ViewBundle;
use graphwalk::{AttributedGraph, ViewKind};
use ndarray::array;

fn main() -> graphwalk::Result<()> {
    // a four-ring with one pendant atom; features are (is_carbon, charge)
    let g = AttributedGraph::from_pairs(
        5,
        &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 4)],
        array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 0.5]],
    )?;
    let bundle = ViewBundle::build(&g, &[ViewKind::Walk1, ViewKind::Walk2, ViewKind::WalkGamma], 0.5)?;
    for kind in [ViewKind::Walk1, ViewKind::Walk2, ViewKind::WalkGamma] {
        let v = bundle.view(kind).expect("view was requested");
        println!("== {kind} ==");
        println!("adjacency:\n{:.4}", v.adjacency);
        println!("stationary: {:.4}", v.stationary);
        println!("scaled features:\n{:.4}\n", v.scaled_features);
    }
    Ok(())
}
