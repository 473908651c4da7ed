//! Padding that makes every graph connected with at least three nodes.
//!
//! - disconnected (any size) or two nodes: append one zero-featured node
//!   joined to every original node with unit weight;
//! - a single node: append two zero-featured nodes joined to it and to each
//!   other, giving a triangle.
//!
//! The [`RepairRecord`] keeps track of what was added so padded graphs stay
//! distinguishable from ones that were connected to begin with.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, AttributedGraph, Edge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairReason {
    None,
    Disconnected,
    TwoNode,
    SingleNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairRecord {
    pub original_node_count: usize,
    pub added_nodes: Vec<usize>,
    pub reason: RepairReason,
}

impl RepairRecord {
    pub fn was_padded(&self) -> bool {
        self.reason != RepairReason::None
    }
}

pub fn repair(g: &AttributedGraph) -> Result<(AttributedGraph, RepairRecord)> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let connected = graph::is_connected(g);
    let (reason, added) = match n {
        1 => (RepairReason::SingleNode, 2),
        _ if !connected => (RepairReason::Disconnected, 1),
        2 => (RepairReason::TwoNode, 1),
        _ => (RepairReason::None, 0),
    };
    let record = RepairRecord {
        original_node_count: n,
        added_nodes: (n..n + added).collect(),
        reason,
    };
    if added == 0 {
        return Ok((g.clone(), record));
    }
    let mut extra = Vec::new();
    for new in n..n + added {
        extra.extend((0..n).map(|old| Edge::unit(old, new)));
    }
    if added == 2 {
        extra.push(Edge::unit(n, n + 1));
    }
    Ok((g.extended(added, &extra)?, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{k3, p3};
    use ndarray::{array, Array2};

    #[test]
    fn connected_graph_untouched() {
        let (h, rec) = repair(&p3()).unwrap();
        assert_eq!(h, p3());
        assert_eq!(rec, RepairRecord { original_node_count: 3, added_nodes: vec![], reason: RepairReason::None });
        assert!(!rec.was_padded());
    }

    #[test]
    fn disconnected_gets_virtual_hub() {
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]];
        let g = AttributedGraph::from_pairs(4, &[(0, 1), (2, 3)], x.clone()).unwrap();
        let (h, rec) = repair(&g).unwrap();
        assert_eq!(rec.reason, RepairReason::Disconnected);
        assert_eq!(rec.added_nodes, vec![4]);
        assert_eq!(h.node_count(), 5);
        for i in 0..4 {
            assert_eq!(h.adjacency()[[i, 4]], 1.0);
        }
        assert_eq!(h.features().row(4), array![0.0, 0.0]);
        assert_eq!(h.features().slice(ndarray::s![..4, ..]), x);
        assert!(graph::is_connected(&h));
    }

    #[test]
    fn two_node_becomes_triangle() {
        let g = AttributedGraph::from_pairs(2, &[(0, 1)], Array2::ones((2, 1))).unwrap();
        let (h, rec) = repair(&g).unwrap();
        assert_eq!(rec.reason, RepairReason::TwoNode);
        assert_eq!(h.adjacency(), k3().adjacency());
        assert_eq!(h.features().row(2), array![0.0]);
    }

    #[test]
    fn two_isolated_nodes_take_disconnected_path() {
        let g = AttributedGraph::new(2, vec![], Array2::ones((2, 1))).unwrap();
        let (h, rec) = repair(&g).unwrap();
        assert_eq!(rec.reason, RepairReason::Disconnected);
        assert_eq!(h.node_count(), 3);
        assert!(graph::is_connected(&h));
    }

    #[test]
    fn single_node_becomes_triangle() {
        let g = AttributedGraph::new(1, vec![], array![[6.0]]).unwrap();
        let (h, rec) = repair(&g).unwrap();
        assert_eq!(rec.reason, RepairReason::SingleNode);
        assert_eq!(rec.added_nodes, vec![1, 2]);
        assert_eq!(h.adjacency(), k3().adjacency());
        assert_eq!(h.features(), array![[6.0], [0.0], [0.0]]);
    }

    #[test]
    fn repair_is_idempotent() {
        let g = AttributedGraph::new(1, vec![], array![[6.0]]).unwrap();
        let (h, _) = repair(&g).unwrap();
        let (h2, rec) = repair(&h).unwrap();
        assert_eq!(rec.reason, RepairReason::None);
        assert_eq!(h, h2);
    }

    #[test]
    fn weights_survive() {
        let g = AttributedGraph::new(4, vec![Edge::new(0, 1, 2.5), Edge::new(2, 3, 0.5)], Array2::ones((4, 1))).unwrap();
        let (h, _) = repair(&g).unwrap();
        assert_eq!(h.adjacency()[[0, 1]], 2.5);
        assert_eq!(h.adjacency()[[2, 3]], 0.5);
    }
}
