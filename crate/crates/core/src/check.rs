//! Numerical invariant checks on graphs and on stored bundles.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{
    laplacian, stationarity_residual, AttributedGraph, DETAILED_BALANCE_TOL, MASS_TOL, STATIONARITY_TOL,
};
use crate::io::BundleDocument;
use crate::spectral::{fractional_laplacian, NEGATIVE_ADJACENCY_TOL};
use crate::walks::{count_walks_bruteforce, walk1_view, walk2_view, walk_gamma_view, ViewKind};

pub const GAMMA_STATIONARITY_TOL: f64 = 1e-9;
pub const GAMMA_ONE_ADJACENCY_TOL: f64 = 1e-9;
pub const GAMMA_ONE_STATIONARY_TOL: f64 = 1e-10;
pub const SCALING_TOL: f64 = 1e-12;
/// Largest graph on which the walk-count oracle runs.
pub const ORACLE_MAX_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub graph_id: String,
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

struct Collector<'a> {
    id: &'a str,
    out: Vec<CheckOutcome>,
}

impl Collector<'_> {
    /// Passes when `value <= threshold`; NaN fails.
    fn record(&mut self, check: impl Into<String>, value: f64, threshold: f64) {
        self.out.push(CheckOutcome {
            graph_id: self.id.to_string(),
            check: check.into(),
            value,
            threshold,
            passed: value <= threshold,
        });
    }

    fn record_result(&mut self, check: &str, value: Result<f64>, threshold: f64) {
        self.record(check, value.unwrap_or(f64::NAN), threshold);
    }
}

fn max_abs_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    if a.dim() != b.dim() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs_diff1(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `max |π_i p_ij − π_j p_ji|`, with zero rows for isolated nodes.
fn balance_violation(a: ArrayView2<'_, f64>, pi: ArrayView1<'_, f64>) -> f64 {
    let n = a.nrows();
    let d: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    let p = |i: usize, j: usize| if d[i] > 0.0 { a[[i, j]] / d[i] } else { 0.0 };
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((pi[i] * p(i, j) - pi[j] * p(j, i)).abs());
        }
    }
    worst
}

fn mass_error(pi: ArrayView1<'_, f64>) -> f64 {
    let negative = pi.iter().fold(0.0f64, |m, &v| if v < 0.0 { m.max(-v) } else { m });
    (pi.sum() - 1.0).abs().max(negative)
}

/// Largest positive off-diagonal entry of `L^γ`, i.e. the worst negative
/// entry of `A_γ`.
fn gamma_negativity(lg: ArrayView2<'_, f64>) -> f64 {
    let mut worst = 0.0f64;
    for ((i, j), &v) in lg.indexed_iter() {
        if i != j {
            worst = worst.max(v);
        }
    }
    worst
}

/// Runs the invariant suite on a (repaired) graph.
pub fn check_graph(id: &str, g: &AttributedGraph, gamma: f64) -> Vec<CheckOutcome> {
    let mut c = Collector { id, out: Vec::new() };
    let a = g.adjacency();

    match walk1_view(g) {
        Ok(v) => {
            c.record("stationarity", stationarity_residual(a, v.stationary.view()), STATIONARITY_TOL);
            c.record("detailed_balance", balance_violation(a, v.stationary.view()), DETAILED_BALANCE_TOL);
            c.record("pi_mass", mass_error(v.stationary.view()), MASS_TOL);
            match walk_gamma_view(g, 1.0) {
                Ok(one) => {
                    c.record("gamma_one_adjacency", max_abs_diff(one.adjacency.view(), a), GAMMA_ONE_ADJACENCY_TOL);
                    c.record(
                        "gamma_one_stationary",
                        max_abs_diff1(one.stationary.view(), v.stationary.view()),
                        GAMMA_ONE_STATIONARY_TOL,
                    );
                }
                Err(_) => {
                    c.record("gamma_one_adjacency", f64::NAN, GAMMA_ONE_ADJACENCY_TOL);
                    c.record("gamma_one_stationary", f64::NAN, GAMMA_ONE_STATIONARY_TOL);
                }
            }
        }
        Err(_) => c.record("stationarity", f64::NAN, STATIONARITY_TOL),
    }

    let lg = fractional_laplacian(&laplacian(g), gamma);
    c.record_result("gamma_nonnegativity", lg.map(|fl| gamma_negativity(fl.matrix().view())), NEGATIVE_ADJACENCY_TOL);
    c.record_result(
        "gamma_stationarity",
        walk_gamma_view(g, gamma).map(|v| stationarity_residual(v.adjacency.view(), v.stationary.view())),
        GAMMA_STATIONARITY_TOL,
    );

    if g.node_count() <= ORACLE_MAX_NODES && g.node_count() >= 3 {
        let oracle = || -> Result<f64> {
            let a2 = walk2_view(g)?.adjacency;
            let scale = a2.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let n = g.node_count();
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let expected = if i == j { 0.0 } else { count_walks_bruteforce(g, 2, i, j)? };
                    worst = worst.max((a2[[i, j]] - expected).abs() / scale);
                }
            }
            Ok(worst)
        };
        // exact for unit weights; relative rounding slack otherwise
        c.record_result("walk2_oracle", oracle(), 1e-12);
    }
    c.out
}

/// Re-checks the stored views of a bundle without recomputing them.
pub fn check_bundle(doc: &BundleDocument) -> Vec<CheckOutcome> {
    let mut c = Collector { id: &doc.id, out: Vec::new() };
    let features = match doc.feature_matrix() {
        Ok(x) => x,
        Err(_) => {
            c.record("bundle_shape", f64::NAN, 0.0);
            return c.out;
        }
    };
    for v in &doc.views {
        let name = v.kind.name();
        let (adj, scaled) = match (v.adjacency_matrix(), v.scaled_feature_matrix()) {
            (Ok(a), Ok(s)) if a.dim() == (doc.n, doc.n) && v.stationary.len() == doc.n => (a, s),
            _ => {
                c.record(format!("{name}.shape"), f64::NAN, 0.0);
                continue;
            }
        };
        let pi = Array1::from(v.stationary.clone());
        let tol = if v.kind == ViewKind::WalkGamma { GAMMA_STATIONARITY_TOL } else { STATIONARITY_TOL };
        c.record(format!("{name}.stationarity"), stationarity_residual(adj.view(), pi.view()), tol);
        c.record(format!("{name}.detailed_balance"), balance_violation(adj.view(), pi.view()), DETAILED_BALANCE_TOL);
        c.record(format!("{name}.pi_mass"), mass_error(pi.view()), MASS_TOL);
        let negative = adj.iter().fold(0.0f64, |m, &x| if x < 0.0 { m.max(-x) } else { m });
        c.record(format!("{name}.nonnegativity"), negative, 0.0);
        let expected: Array2<f64> = &features * &pi.view().insert_axis(ndarray::Axis(1));
        c.record(format!("{name}.scaling"), max_abs_diff(scaled.view(), expected.view()), SCALING_TOL);
    }
    c.out
}
