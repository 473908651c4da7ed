//! The three random-walk views of a graph.
//!
//! Each view is a triple `(A_k, π_k, X_k)`:
//!
//! ```text
//! walk1:  A₁ = A                    X₁ = diag(π₁) X
//! walk2:  A₂ = A² − diag(A²)        X₂ = diag(π₂) X
//! walkγ:  A_γ = diag(L^γ) − L^γ     X_γ = diag(π_γ) X
//! ```
//!
//! `π₁` and `π₂` come from the degree formula applied to their adjacency;
//! `π_γ` is the normalised diagonal of `L^γ`. `A₂` drops closed 2-walks and
//! may leave nodes isolated (the middle of a path, the centre of a star);
//! those nodes simply receive zero stationary mass.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, AttributedGraph};
use crate::spectral;

/// Which feature matrix a consumer wants. `Raw` is the unscaled `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViewKind {
    #[serde(rename = "x")]
    Raw,
    #[serde(rename = "x1")]
    Walk1,
    #[serde(rename = "x2")]
    Walk2,
    #[serde(rename = "xg")]
    WalkGamma,
}

impl ViewKind {
    pub const ALL: [ViewKind; 4] = [ViewKind::Raw, ViewKind::Walk1, ViewKind::Walk2, ViewKind::WalkGamma];

    pub fn name(self) -> &'static str {
        match self {
            ViewKind::Raw => "x",
            ViewKind::Walk1 => "x1",
            ViewKind::Walk2 => "x2",
            ViewKind::WalkGamma => "xg",
        }
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ViewKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(ViewKind::Raw),
            "x1" => Ok(ViewKind::Walk1),
            "x2" => Ok(ViewKind::Walk2),
            "xg" | "xgamma" => Ok(ViewKind::WalkGamma),
            other => Err(Error::InvalidConfig(format!("unknown view {other:?} (expected x, x1, x2, xg)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "walk", rename_all = "snake_case")]
pub enum WalkKind {
    Walk1,
    Walk2,
    WalkGamma { gamma: f64 },
}

impl WalkKind {
    pub fn view_kind(self) -> ViewKind {
        match self {
            WalkKind::Walk1 => ViewKind::Walk1,
            WalkKind::Walk2 => ViewKind::Walk2,
            WalkKind::WalkGamma { .. } => ViewKind::WalkGamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkView {
    pub kind: WalkKind,
    pub adjacency: Array2<f64>,
    pub stationary: Array1<f64>,
    pub scaled_features: Array2<f64>,
}

/// `diag(π) X`, row by row.
pub fn scale_rows(pi: &Array1<f64>, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for (mut row, &p) in out.rows_mut().into_iter().zip(pi.iter()) {
        row.mapv_inplace(|v| p * v);
    }
    out
}

pub fn walk1_view(g: &AttributedGraph) -> Result<WalkView> {
    let adjacency = g.adjacency().to_owned();
    let stationary = graph::stationary_from_degrees(&graph::degrees(g))?;
    let scaled_features = scale_rows(&stationary, g.features());
    Ok(WalkView { kind: WalkKind::Walk1, adjacency, stationary, scaled_features })
}

/// `A² − diag(A²)`.
pub fn loop_free_square(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut sq = a.dot(&a);
    sq.diag_mut().fill(0.0);
    sq
}

pub fn walk2_view(g: &AttributedGraph) -> Result<WalkView> {
    let n = g.node_count();
    if n < 3 {
        return Err(Error::TooSmall(n));
    }
    let adjacency = loop_free_square(g.adjacency());
    let stationary = graph::stationary_from_degrees(&graph::degrees_of(adjacency.view()))?;
    let scaled_features = scale_rows(&stationary, g.features());
    Ok(WalkView { kind: WalkKind::Walk2, adjacency, stationary, scaled_features })
}

pub fn walk_gamma_view(g: &AttributedGraph, gamma: f64) -> Result<WalkView> {
    let fl = spectral::fractional_laplacian(&graph::laplacian(g), gamma)?;
    let adjacency = spectral::gamma_adjacency(&fl)?;
    let stationary = spectral::gamma_stationary(&fl)?;
    let scaled_features = scale_rows(&stationary, g.features());
    Ok(WalkView { kind: WalkKind::WalkGamma { gamma }, adjacency, stationary, scaled_features })
}

/// Sum over all node sequences `i = v0, v1, …, vk = j` of the product of
/// edge weights along the sequence. Exponential; a test oracle for `A^k`.
pub fn count_walks_bruteforce(g: &AttributedGraph, k: usize, i: usize, j: usize) -> Result<f64> {
    let n = g.node_count();
    if n > 8 || k > 6 || k == 0 {
        return Err(Error::OracleScaleExceeded { n, k });
    }
    if i >= n || j >= n {
        return Err(Error::DimensionMismatch(format!("node ({i}, {j}) out of range for {n} nodes")));
    }
    fn go(a: ArrayView2<'_, f64>, at: usize, remaining: usize, target: usize) -> f64 {
        if remaining == 0 {
            return if at == target { 1.0 } else { 0.0 };
        }
        (0..a.nrows())
            .filter(|&next| a[[at, next]] != 0.0)
            .map(|next| a[[at, next]] * go(a, next, remaining - 1, target))
            .sum()
    }
    Ok(go(g.adjacency(), i, k, j))
}

/// The raw features plus every requested walk view of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewBundle {
    pub features: Array2<f64>,
    pub adjacency: Array2<f64>,
    pub walk1: Option<WalkView>,
    pub walk2: Option<WalkView>,
    pub walk_gamma: Option<WalkView>,
}

impl ViewBundle {
    /// Builds the walk views needed to serve `kinds`. `gamma` is only used
    /// when `WalkGamma` is requested.
    pub fn build(g: &AttributedGraph, kinds: &[ViewKind], gamma: f64) -> Result<Self> {
        let wants = |k| kinds.contains(&k);
        Ok(Self {
            features: g.features().to_owned(),
            adjacency: g.adjacency().to_owned(),
            walk1: wants(ViewKind::Walk1).then(|| walk1_view(g)).transpose()?,
            walk2: wants(ViewKind::Walk2).then(|| walk2_view(g)).transpose()?,
            walk_gamma: wants(ViewKind::WalkGamma).then(|| walk_gamma_view(g, gamma)).transpose()?,
        })
    }

    pub fn view(&self, kind: ViewKind) -> Option<&WalkView> {
        match kind {
            ViewKind::Raw => None,
            ViewKind::Walk1 => self.walk1.as_ref(),
            ViewKind::Walk2 => self.walk2.as_ref(),
            ViewKind::WalkGamma => self.walk_gamma.as_ref(),
        }
    }

    /// Feature matrix for `kind`: raw `X` or the view's `diag(π) X`.
    pub fn feature_matrix(&self, kind: ViewKind) -> Result<&Array2<f64>> {
        match kind {
            ViewKind::Raw => Ok(&self.features),
            k => self
                .view(k)
                .map(|v| &v.scaled_features)
                .ok_or_else(|| Error::DimensionMismatch(format!("bundle has no {k} view"))),
        }
    }

    pub fn views(&self) -> impl Iterator<Item = &WalkView> {
        [&self.walk1, &self.walk2, &self.walk_gamma].into_iter().flatten()
    }

    pub fn node_count(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{k3, p3, star4};
    use ndarray::array;

    fn close(a: &Array1<f64>, b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn walk1_on_path() {
        let v = walk1_view(&p3()).unwrap();
        assert_eq!(v.stationary, array![0.25, 0.5, 0.25]);
        assert_eq!(v.scaled_features, array![[0.25], [0.5], [0.25]]);
    }

    #[test]
    fn walk1_on_triangle_identity_features() {
        let g = AttributedGraph::from_pairs(3, &[(0, 1), (0, 2), (1, 2)], Array2::eye(3)).unwrap();
        let v = walk1_view(&g).unwrap();
        let expected = Array2::<f64>::eye(3) / 3.0;
        assert!((&v.scaled_features - &expected).iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn walk2_examples() {
        let v = walk2_view(&k3()).unwrap();
        assert_eq!(v.adjacency, k3().adjacency().to_owned());
        assert!(close(&v.stationary, &[1.0 / 3.0; 3], 1e-15));

        let v = walk2_view(&p3()).unwrap();
        assert_eq!(v.adjacency, array![[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert_eq!(v.stationary, array![0.5, 0.0, 0.5]);

        let v = walk2_view(&star4()).unwrap();
        let third = 1.0 / 3.0;
        assert!(close(&v.stationary, &[0.0, third, third, third], 1e-15));
        assert_eq!(v.adjacency.row(0).sum(), 0.0);
        assert_eq!(v.adjacency[[1, 2]], 1.0);
        assert_eq!(v.adjacency[[2, 3]], 1.0);
    }

    #[test]
    fn walk2_requires_three_nodes() {
        let g = AttributedGraph::from_pairs(2, &[(0, 1)], Array2::ones((2, 1))).unwrap();
        assert_eq!(walk2_view(&g), Err(Error::TooSmall(2)));
    }

    #[test]
    fn gamma_one_matches_walk1() {
        for g in [p3(), k3(), star4()] {
            let a = walk1_view(&g).unwrap();
            let b = walk_gamma_view(&g, 1.0).unwrap();
            assert!((&a.adjacency - &b.adjacency).iter().all(|x| x.abs() < 1e-9));
            assert!((&a.stationary - &b.stationary).iter().all(|x| x.abs() < 1e-10));
        }
    }

    #[test]
    fn gamma_view_examples() {
        let v = walk_gamma_view(&k3(), 0.1).unwrap();
        assert!(v.scaled_features.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-14));
        let v = walk_gamma_view(&p3(), 0.1).unwrap();
        assert!(v.adjacency[[0, 2]] > 0.0);
        assert!((v.stationary[0] - v.stationary[2]).abs() < 1e-14);
    }

    #[test]
    fn bruteforce_examples() {
        assert_eq!(count_walks_bruteforce(&p3(), 2, 0, 2).unwrap(), 1.0);
        assert_eq!(count_walks_bruteforce(&k3(), 2, 0, 0).unwrap(), 2.0);
        assert_eq!(count_walks_bruteforce(&p3(), 2, 1, 1).unwrap(), 2.0);
        assert_eq!(count_walks_bruteforce(&p3(), 7, 0, 0), Err(Error::OracleScaleExceeded { n: 3, k: 7 }));
    }

    #[test]
    fn bundle_serves_requested_views() {
        let b = ViewBundle::build(&p3(), &[ViewKind::Raw, ViewKind::Walk2], 0.1).unwrap();
        assert!(b.walk1.is_none() && b.walk_gamma.is_none());
        assert_eq!(b.feature_matrix(ViewKind::Walk2).unwrap(), &array![[0.5], [0.0], [0.5]]);
        assert!(b.feature_matrix(ViewKind::Walk1).is_err());
    }

    #[test]
    fn view_kind_parsing() {
        assert_eq!("XG".parse::<ViewKind>().unwrap(), ViewKind::WalkGamma);
        assert!("x3".parse::<ViewKind>().is_err());
    }
}
