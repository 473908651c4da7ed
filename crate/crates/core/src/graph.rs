//! Attributed undirected graphs and the random-walk machinery defined on them.
//!
//! A random walk on a weighted graph moves from node `i` to a neighbour `j`
//! with probability `p_ij = w_ij / d_i`, giving the row-stochastic transition
//! matrix `M = D⁻¹A`. A distribution evolves as `P_{t+1} = Mᵀ P_t`, and for an
//! undirected graph detailed balance `π_i p_ij = π_j p_ji` forces the
//! stationary distribution to be proportional to the degrees:
//!
//! ```text
//! π = diag(D) / Σ_i d_i
//! ```
//!
//! Everything here is dense. Graphs are small (molecules have tens of nodes)
//! and are capped at [`MAX_NODES`].

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unionfind::UnionFind;

/// Upper bound on the node count of a dense graph.
pub const MAX_NODES: usize = 4096;
/// Row-sum tolerance of a transition matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Symmetry tolerance of a Laplacian.
pub const LAPLACIAN_SYMMETRY_TOL: f64 = 1e-12;
/// Row-sum tolerance of a Laplacian.
pub const LAPLACIAN_ROW_SUM_TOL: f64 = 1e-10;
/// Tolerance on `‖π − Mᵀπ‖∞`.
pub const STATIONARITY_TOL: f64 = 1e-10;
/// Tolerance on `max |π_i p_ij − π_j p_ji|`.
pub const DETAILED_BALANCE_TOL: f64 = 1e-12;
/// Tolerance on the total mass of an input probability vector.
pub const PROBABILITY_TOL: f64 = 1e-12;
/// Tolerance on the total mass after evolving a distribution.
pub const MASS_TOL: f64 = 1e-10;

/// Undirected weighted edge. Endpoints may be given in either order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(u: usize, v: usize, weight: f64) -> Self {
        Self { u, v, weight }
    }

    pub fn unit(u: usize, v: usize) -> Self {
        Self::new(u, v, 1.0)
    }

    fn canonical(self) -> Self {
        if self.u <= self.v {
            self
        } else {
            Self::new(self.v, self.u, self.weight)
        }
    }
}

/// Unvalidated graph data, as it comes out of a parser.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGraph {
    pub node_count: usize,
    pub edges: Vec<Edge>,
    pub features: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyGraph,
    TooLarge { node_count: usize },
    SelfLoop { node: usize },
    NodeOutOfRange { u: usize, v: usize },
    NegativeWeight { u: usize, v: usize, weight: f64 },
    NonFiniteWeight { u: usize, v: usize },
    DuplicateEdge { u: usize, v: usize },
    FeatureRowMismatch { expected: usize, found: usize },
    EmptyFeatures,
    NonFiniteFeature { row: usize, col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGraph => write!(f, "graph has no nodes"),
            Violation::TooLarge { node_count } => {
                write!(f, "{node_count} nodes exceeds the limit of {MAX_NODES}")
            }
            Violation::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Violation::NodeOutOfRange { u, v } => write!(f, "edge ({u}, {v}) references a missing node"),
            Violation::NegativeWeight { u, v, weight } => {
                write!(f, "edge ({u}, {v}) has negative weight {weight}")
            }
            Violation::NonFiniteWeight { u, v } => write!(f, "edge ({u}, {v}) has a non-finite weight"),
            Violation::DuplicateEdge { u, v } => write!(f, "edge ({u}, {v}) listed more than once"),
            Violation::FeatureRowMismatch { expected, found } => {
                write!(f, "feature matrix has {found} rows, expected {expected}")
            }
            Violation::EmptyFeatures => write!(f, "feature matrix has no columns"),
            Violation::NonFiniteFeature { row, col } => write!(f, "feature ({row}, {col}) is not finite"),
        }
    }
}

/// Result of [`validate_graph`]. An empty report means the graph is well formed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every [`AttributedGraph`] invariant and lists what is wrong.
pub fn validate_graph(raw: &RawGraph) -> ValidationReport {
    let n = raw.node_count;
    let mut violations = Vec::new();
    if n == 0 {
        violations.push(Violation::EmptyGraph);
    }
    if n > MAX_NODES {
        violations.push(Violation::TooLarge { node_count: n });
    }
    let mut seen = std::collections::BTreeSet::new();
    for e in &raw.edges {
        let e = e.canonical();
        if e.u >= n || e.v >= n {
            violations.push(Violation::NodeOutOfRange { u: e.u, v: e.v });
        }
        if e.u == e.v {
            violations.push(Violation::SelfLoop { node: e.u });
        }
        if !e.weight.is_finite() {
            violations.push(Violation::NonFiniteWeight { u: e.u, v: e.v });
        } else if e.weight < 0.0 {
            violations.push(Violation::NegativeWeight { u: e.u, v: e.v, weight: e.weight });
        }
        if !seen.insert((e.u, e.v)) {
            violations.push(Violation::DuplicateEdge { u: e.u, v: e.v });
        }
    }
    let (rows, cols) = raw.features.dim();
    if rows != n {
        violations.push(Violation::FeatureRowMismatch { expected: n, found: rows });
    }
    if cols == 0 {
        violations.push(Violation::EmptyFeatures);
    }
    if let Some(((row, col), _)) = raw.features.indexed_iter().find(|(_, x)| !x.is_finite()) {
        violations.push(Violation::NonFiniteFeature { row, col });
    }
    ValidationReport { violations }
}

/// Validated, immutable undirected graph with a node-feature matrix.
///
/// Edges are stored canonically (`u < v`, sorted) with strictly positive
/// weights; zero-weight edges are treated as absent.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    edges: Vec<Edge>,
    adjacency: Array2<f64>,
    features: Array2<f64>,
}

impl AttributedGraph {
    pub fn new(node_count: usize, edges: Vec<Edge>, features: Array2<f64>) -> Result<Self> {
        Self::try_from(RawGraph { node_count, edges, features })
    }

    /// Unit-weight graph from endpoint pairs.
    pub fn from_pairs(node_count: usize, pairs: &[(usize, usize)], features: Array2<f64>) -> Result<Self> {
        let edges = pairs.iter().map(|&(u, v)| Edge::unit(u, v)).collect();
        Self::new(node_count, edges, features)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Canonical edge list (`u < v`, sorted).
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn adjacency(&self) -> ArrayView2<'_, f64> {
        self.adjacency.view()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count();
        if perm.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {n} nodes",
                perm.len()
            )));
        }
        let mut features = Array2::zeros(self.features.dim());
        for (old, &new) in perm.iter().enumerate() {
            features.row_mut(new).assign(&self.features.row(old));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(perm[e.u], perm[e.v], e.weight))
            .collect();
        Self::new(n, edges, features)
    }

    /// Returns the same graph with a new edge list appended to the node set.
    /// Used by repair; everything is revalidated.
    pub(crate) fn extended(&self, extra_nodes: usize, extra_edges: &[Edge]) -> Result<Self> {
        let n = self.node_count() + extra_nodes;
        let mut features = Array2::zeros((n, self.feature_dim()));
        features
            .slice_mut(ndarray::s![..self.node_count(), ..])
            .assign(&self.features);
        let mut edges = self.edges.clone();
        edges.extend_from_slice(extra_edges);
        Self::new(n, edges, features)
    }
}

impl TryFrom<RawGraph> for AttributedGraph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        let report = validate_graph(&raw);
        if !report.is_empty() {
            if raw.node_count > MAX_NODES {
                return Err(Error::GraphTooLarge(raw.node_count));
            }
            return Err(Error::InvalidGraph(report));
        }
        let n = raw.node_count;
        let mut edges: Vec<Edge> = raw
            .edges
            .into_iter()
            .map(Edge::canonical)
            .filter(|e| e.weight > 0.0)
            .collect();
        edges.sort_by(|a, b| (a.u, a.v).cmp(&(b.u, b.v)));
        let mut adjacency = Array2::zeros((n, n));
        for e in &edges {
            adjacency[[e.u, e.v]] = e.weight;
            adjacency[[e.v, e.u]] = e.weight;
        }
        Ok(Self { edges, adjacency, features: raw.features })
    }
}

/// Weighted node degrees `d_i = Σ_j w_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(Array1<f64>);

impl DegreeVector {
    pub fn new(d: Array1<f64>) -> Self {
        Self(d)
    }

    /// Degrees read off a matrix diagonal, e.g. `diag(L)` or `diag(L^γ)`.
    pub fn from_diagonal(m: ArrayView2<'_, f64>) -> Self {
        Self(m.diag().to_owned())
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }
}

pub fn degrees(g: &AttributedGraph) -> DegreeVector {
    degrees_of(g.adjacency())
}

/// Row sums of an arbitrary (symmetric, nonnegative) adjacency matrix.
pub fn degrees_of(adjacency: ArrayView2<'_, f64>) -> DegreeVector {
    DegreeVector(adjacency.rows().into_iter().map(|r| r.iter().sum()).collect())
}

/// Row-stochastic matrix `M = D⁻¹A`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(Array2<f64>);

impl TransitionMatrix {
    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }
}

pub fn transition_matrix(adjacency: ArrayView2<'_, f64>, d: &DegreeVector) -> Result<TransitionMatrix> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n {
        return Err(Error::NotSquare(n, adjacency.ncols()));
    }
    if d.0.len() != n {
        return Err(Error::DimensionMismatch(format!("{} degrees for {n} nodes", d.0.len())));
    }
    if let Some(i) = d.0.iter().position(|&x| x <= 0.0) {
        return Err(Error::IsolatedNode(i));
    }
    let mut m = adjacency.to_owned();
    for (mut row, &di) in m.rows_mut().into_iter().zip(d.0.iter()) {
        row.mapv_inplace(|w| w / di);
    }
    Ok(TransitionMatrix(m))
}

/// `(Mᵀ)ᵗ p0`.
pub fn evolve_distribution(m: &TransitionMatrix, p0: ArrayView1<'_, f64>, steps: usize) -> Result<Array1<f64>> {
    let n = m.0.nrows();
    if p0.len() != n {
        return Err(Error::DimensionMismatch(format!("distribution of length {} for {n} nodes", p0.len())));
    }
    if p0.iter().any(|&x| x < 0.0) || (p0.sum() - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::InvalidConfig("initial distribution must be nonnegative and sum to 1".into()));
    }
    let mt = m.0.t();
    let mut p = p0.to_owned();
    for _ in 0..steps {
        p = mt.dot(&p);
    }
    Ok(p)
}

/// `π_i = d_i / Σ_j d_j`.
pub fn stationary_from_degrees(d: &DegreeVector) -> Result<Array1<f64>> {
    let total: f64 = d.0.sum();
    if total <= 0.0 {
        return Err(Error::ZeroTotalDegree);
    }
    Ok(d.0.mapv(|x| x / total))
}

/// Connected components, each sorted, ordered by smallest member.
pub fn connected_components(g: &AttributedGraph) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(g.node_count());
    for e in g.edges() {
        uf.union(e.u, e.v);
    }
    uf.groups()
}

pub fn is_connected(g: &AttributedGraph) -> bool {
    connected_components(g).len() == 1
}

/// Symmetric `L = D − A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(Array2<f64>);

impl LaplacianMatrix {
    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    /// Wraps a matrix after checking symmetry and zero row sums.
    pub fn from_matrix(l: Array2<f64>) -> Result<Self> {
        let (r, c) = l.dim();
        if r != c {
            return Err(Error::NotSquare(r, c));
        }
        let asym = max_asymmetry(l.view());
        if asym > LAPLACIAN_SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        if let Some(row) = l.rows().into_iter().position(|row| row.sum().abs() > LAPLACIAN_ROW_SUM_TOL) {
            return Err(Error::InvalidConfig(format!("Laplacian row {row} does not sum to zero")));
        }
        Ok(Self(l))
    }
}

pub fn laplacian(g: &AttributedGraph) -> LaplacianMatrix {
    laplacian_of(g.adjacency())
}

pub fn laplacian_of(adjacency: ArrayView2<'_, f64>) -> LaplacianMatrix {
    let d = degrees_of(adjacency);
    let mut l = adjacency.mapv(|w| -w);
    for (i, &di) in d.0.iter().enumerate() {
        l[[i, i]] = di;
    }
    LaplacianMatrix(l)
}

pub(crate) fn max_asymmetry(m: ArrayView2<'_, f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

/// `‖π − Mᵀπ‖∞` for an adjacency that may contain isolated nodes.
///
/// Isolated rows contribute nothing to `Mᵀπ`; a correct `π` gives them
/// zero mass, so the residual still vanishes.
pub fn stationarity_residual(adjacency: ArrayView2<'_, f64>, pi: ArrayView1<'_, f64>) -> f64 {
    let n = adjacency.nrows();
    let d = degrees_of(adjacency);
    let mut next = Array1::<f64>::zeros(n);
    for i in 0..n {
        let di = d.0[i];
        if di <= 0.0 {
            continue;
        }
        for j in 0..n {
            next[j] += pi[i] * adjacency[[i, j]] / di;
        }
    }
    next.iter().zip(pi.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `max_ij |π_i p_ij − π_j p_ji|`.
pub fn detailed_balance_violation(m: &TransitionMatrix, pi: ArrayView1<'_, f64>) -> f64 {
    let p = &m.0;
    let n = p.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((pi[i] * p[[i, j]] - pi[j] * p[[j, i]]).abs());
        }
    }
    worst
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use ndarray::Array2;

    pub fn p3() -> AttributedGraph {
        AttributedGraph::from_pairs(3, &[(0, 1), (1, 2)], Array2::ones((3, 1))).unwrap()
    }

    pub fn k3() -> AttributedGraph {
        AttributedGraph::from_pairs(3, &[(0, 1), (0, 2), (1, 2)], Array2::ones((3, 1))).unwrap()
    }

    pub fn star4() -> AttributedGraph {
        AttributedGraph::from_pairs(4, &[(0, 1), (0, 2), (0, 3)], Array2::ones((4, 1))).unwrap()
    }
}
