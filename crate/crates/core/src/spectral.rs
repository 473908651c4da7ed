//! Symmetric eigendecomposition and fractional powers of the graph Laplacian.
//!
//! For a Laplacian `L = U Λ Uᵀ` and `γ ∈ (0, 1]` the fractional Laplacian is
//! `L^γ = U Λ^γ Uᵀ`. Its off-diagonal entries are nonpositive, so
//! `A_γ = diag(L^γ) − L^γ` is a dense nonnegative adjacency that links
//! every pair of nodes in a connected graph, and the fractional walk has
//! stationary distribution `π_γ = diag(L^γ) / tr(L^γ)`.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::graph::{self, DegreeVector, LaplacianMatrix, TransitionMatrix};

/// Symmetry tolerance accepted by [`eigh`].
pub const EIGH_SYMMETRY_TOL: f64 = 1e-9;
/// Convergence threshold on the off-diagonal Frobenius norm, relative to
/// `max(1, ‖A‖_F)`. Near machine precision so that relabeling a graph moves
/// `L^γ` by rounding only.
pub const JACOBI_OFF_DIAGONAL_TOL: f64 = 1e-15;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Eigenvalues with magnitude at most this (relative to `max(1, λ_max)`)
/// are treated as exact zeros before exponentiation; anything more negative
/// is rejected as not PSD.
pub const PSD_CLAMP_TOL: f64 = 1e-9;
/// Negative entries of `A_γ` smaller in magnitude than this are rounding
/// noise and clamped to zero; larger ones indicate a solver failure.
pub const NEGATIVE_ADJACENCY_TOL: f64 = 1e-6;
/// Default fractional walk exponent.
pub const DEFAULT_GAMMA: f64 = 0.1;

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
}

impl SpectralDecomposition {
    /// `U diag(f(λ)) Uᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let u = &self.eigenvectors;
        let scaled = u * &self.eigenvalues.mapv(f).insert_axis(Axis(0));
        scaled.dot(&u.t())
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        self.reconstruct_with(|x| x)
    }
}

/// Cyclic Jacobi eigensolver for dense symmetric matrices.
///
/// Output is deterministic: eigenvalues ascending, and each eigenvector is
/// signed so that its largest-magnitude component is positive.
pub fn eigh(a: ArrayView2<'_, f64>) -> Result<SpectralDecomposition> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::NotSquare(rows, cols));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig("matrix has non-finite entries".into()));
    }
    let asym = graph::max_asymmetry(a);
    if asym > EIGH_SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = rows;
    let mut m = (&a + &a.t()) * 0.5;
    let mut v = Array2::<f64>::eye(n);
    let threshold = JACOBI_OFF_DIAGONAL_TOL * frobenius(m.view()).max(1.0);

    let mut converged = false;
    for _ in 0..=JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(m.view()) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence(JACOBI_MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].total_cmp(&m[[j, j]]));
    let eigenvalues: Array1<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut eigenvectors = Array2::<f64>::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        let mut col = v.column(i).to_owned();
        let mut pivot = 0;
        for r in 1..n {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        if col[pivot] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        eigenvectors.column_mut(k).assign(&col);
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// One Jacobi rotation zeroing `m[p][q]`, accumulated into `v`.
fn rotate(m: &mut Array2<f64>, v: &mut Array2<f64>, p: usize, q: usize) {
    let apq = m[[p, q]];
    if apq == 0.0 {
        return;
    }
    let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = m.nrows();
    for k in 0..n {
        let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
        m[[k, p]] = c * mkp - s * mkq;
        m[[k, q]] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
        m[[p, k]] = c * mpk - s * mqk;
        m[[q, k]] = s * mpk + c * mqk;
    }
    m[[p, q]] = 0.0;
    m[[q, p]] = 0.0;
    for k in 0..n {
        let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
        v[[k, p]] = c * vkp - s * vkq;
        v[[k, q]] = s * vkp + c * vkq;
    }
}

fn frobenius(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn off_diagonal_norm(m: ArrayView2<'_, f64>) -> f64 {
    m.indexed_iter()
        .filter(|((i, j), _)| i != j)
        .map(|(_, x)| x * x)
        .sum::<f64>()
        .sqrt()
}

/// `L^γ = U Λ^γ Uᵀ` with `0^γ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalLaplacian {
    gamma: f64,
    matrix: Array2<f64>,
}

impl FractionalLaplacian {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::GammaOutOfRange(gamma))
    }
}

pub fn fractional_laplacian(l: &LaplacianMatrix, gamma: f64) -> Result<FractionalLaplacian> {
    check_gamma(gamma)?;
    let dec = eigh(l.as_array().view())?;
    let top = dec.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let zero_tol = PSD_CLAMP_TOL * top.max(1.0);
    if let Some(&bad) = dec.eigenvalues.iter().find(|&&x| x < -zero_tol) {
        return Err(Error::NotPsd(bad));
    }
    let powered = dec.reconstruct_with(|x| if x <= zero_tol { 0.0 } else { x.powf(gamma) });
    let matrix = (&powered + &powered.t()) * 0.5;
    Ok(FractionalLaplacian { gamma, matrix })
}

/// `A_γ = diag(L^γ) − L^γ`, clamped to be nonnegative.
pub fn gamma_adjacency(fl: &FractionalLaplacian) -> Result<Array2<f64>> {
    let n = fl.matrix.nrows();
    let mut a = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = -fl.matrix[[i, j]];
            if w < -NEGATIVE_ADJACENCY_TOL {
                return Err(Error::NegativeOffDiagonal { row: i, col: j, value: w });
            }
            a[[i, j]] = w.max(0.0);
        }
    }
    Ok(a)
}

/// `π_γ = diag(L^γ) / tr(L^γ)`.
pub fn gamma_stationary(fl: &FractionalLaplacian) -> Result<Array1<f64>> {
    let diag = fl.matrix.diag().to_owned();
    let trace: f64 = diag.sum();
    if trace <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    Ok(diag.mapv(|x| x / trace))
}

/// `M_γ = diag(L^γ)⁻¹ A_γ`.
pub fn gamma_transition(fl: &FractionalLaplacian, adjacency: ArrayView2<'_, f64>) -> Result<TransitionMatrix> {
    let diag = DegreeVector::from_diagonal(fl.matrix.view());
    graph::transition_matrix(adjacency, &diag)
}
