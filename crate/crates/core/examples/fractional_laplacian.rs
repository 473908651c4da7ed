//! Shows how the fractional Laplacian turns a path into a weighted complete
//! graph: small exponents let the walk jump between distant nodes.
//!
//!     cargo run --example fractional_laplacian

use graphwalk::graph::laplacian;
use graphwalk::spectral::{eigh, fractional_laplacian, gamma_adjacency, gamma_stationary};
use graphwalk::AttributedGraph;
use ndarray::Array2;

fn main() -> graphwalk::Result<()> {
    let n = 5;
    let path: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let g = AttributedGraph::from_pairs(n, &path, Array2::ones((n, 1)))?;
    let l = laplacian(&g);
    println!("Laplacian spectrum of P{n}: {:.4}", eigh(l.as_array().view())?.eigenvalues);

    for gamma in [1.0, 0.9, 0.5, 0.1] {
        let fl = fractional_laplacian(&l, gamma)?;
        let a = gamma_adjacency(&fl)?;
        let pi = gamma_stationary(&fl)?;
        println!("\ngamma = {gamma}");
        println!("weight between the two ends: {:.4}", a[[0, n - 1]]);
        println!("stationary distribution: {pi:.4}");
    }
    Ok(())
}
