//! Repairs graphs that have no usable random walk: a disconnected graph,
//! a bare bond and a lone atom.
//!
//!     cargo run --example repair_disconnected

use graphwalk::repair::repair;
use graphwalk::AttributedGraph;
use ndarray::array;

fn main() -> graphwalk::Result<()> {
    let cases = [
        ("two fragments", AttributedGraph::from_pairs(4, &[(0, 1), (2, 3)], array![[1.0], [2.0], [3.0], [4.0]])?),
        ("two nodes", AttributedGraph::from_pairs(2, &[(0, 1)], array![[1.0], [2.0]])?),
        ("one node", AttributedGraph::from_pairs(1, &[], array![[1.0]])?),
        ("already fine", AttributedGraph::from_pairs(3, &[(0, 1), (1, 2)], array![[1.0], [2.0], [3.0]])?),
    ];
    for (name, g) in cases {
        let (fixed, record) = repair(&g)?;
        println!(
            "{name:>13}: {:?}, {} -> {} nodes, added {:?}, edges {:?}",
            record.reason,
            record.original_node_count,
            fixed.node_count(),
            record.added_nodes,
            fixed.edges().iter().map(|e| (e.u, e.v)).collect::<Vec<_>>()
        );
    }
    Ok(())
}
