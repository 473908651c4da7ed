//! Runs the invariant checker on a weighted graph and prints every check
//! with its measured value and threshold.
//!
//!     cargo run --example stationary_check

use graphwalk::check::check_graph;
use graphwalk::graph::Edge;
use graphwalk::AttributedGraph;
use ndarray::Array2;

fn main() -> graphwalk::Result<()> {
    let edges = vec![Edge::new(0, 1, 2.0), Edge::new(1, 2, 0.5), Edge::new(2, 3, 1.0), Edge::new(3, 0, 1.5), Edge::unit(1, 3)];
    let g = AttributedGraph::new(4, edges, Array2::from_shape_fn((4, 2), |(i, j)| (i + j) as f64))?;
    let outcomes = check_graph("weighted4", &g, 0.5);
    for o in &outcomes {
        println!("{:<22} {:>10.3e} <= {:<8.0e} {}", o.check, o.value, o.threshold, if o.passed { "ok" } else { "FAILED" });
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} checks, {failed} failed", outcomes.len());
    Ok(())
}
