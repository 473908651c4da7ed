//! Per-graph feature normalisation with a learnable mean scale.
//!
//! For column `j` over the graph's `n` nodes:
//!
//! ```text
//! μ_j   = mean_i z_ij
//! s_ij  = z_ij − α_j μ_j
//! σ²_j  = mean_i s_ij²
//! out_ij = γ_j s_ij / √(σ²_j + ε) + β_j
//! ```

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub const GRAPHNORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNormParams {
    /// γ
    pub scale: Array1<f64>,
    /// β
    pub shift: Array1<f64>,
    /// α
    pub mean_scale: Array1<f64>,
}

impl GraphNormParams {
    pub fn identity(h: usize) -> Self {
        Self {
            scale: Array1::ones(h),
            shift: Array1::zeros(h),
            mean_scale: Array1::ones(h),
        }
    }
}

pub(crate) struct Trace {
    mean: Array1<f64>,
    sigma: Array1<f64>,
    /// s / σ
    normalized: Array2<f64>,
}

pub fn graphnorm(z: ArrayView2<'_, f64>, params: &GraphNormParams) -> Array2<f64> {
    forward(z, params).0
}

pub(crate) fn forward(z: ArrayView2<'_, f64>, p: &GraphNormParams) -> (Array2<f64>, Trace) {
    let (n, h) = z.dim();
    let nf = n as f64;
    let mut mean = Array1::zeros(h);
    let mut sigma = Array1::zeros(h);
    let mut normalized = Array2::zeros((n, h));
    let mut out = Array2::zeros((n, h));
    for j in 0..h {
        let col = z.column(j);
        let mu = col.sum() / nf;
        let shift = p.mean_scale[j] * mu;
        let var = col.iter().map(|&v| (v - shift) * (v - shift)).sum::<f64>() / nf;
        let sd = (var + GRAPHNORM_EPS).sqrt();
        for i in 0..n {
            let s = (col[i] - shift) / sd;
            normalized[[i, j]] = s;
            out[[i, j]] = p.scale[j] * s + p.shift[j];
        }
        mean[j] = mu;
        sigma[j] = sd;
    }
    (out, Trace { mean, sigma, normalized })
}

/// Returns `∂L/∂z` and accumulates parameter gradients into `grad`.
pub(crate) fn backward(
    dout: ArrayView2<'_, f64>,
    t: &Trace,
    p: &GraphNormParams,
    grad: &mut GraphNormParams,
) -> Array2<f64> {
    let (n, h) = dout.dim();
    let nf = n as f64;
    let mut dz = Array2::zeros((n, h));
    for j in 0..h {
        let sd = t.sigma[j];
        let mut dscale = 0.0;
        let mut dshift = 0.0;
        // Σ_i ∂L/∂ŝ_i · ŝ_i
        let mut dn_dot_n = 0.0;
        for i in 0..n {
            let g = dout[[i, j]];
            let s_hat = t.normalized[[i, j]];
            dscale += g * s_hat;
            dshift += g;
            dn_dot_n += g * p.scale[j] * s_hat;
        }
        grad.scale[j] += dscale;
        grad.shift[j] += dshift;
        // ŝ = s/σ with σ² = mean(s²) + ε:
        // ∂L/∂s_i = (∂L/∂ŝ_i − ŝ_i · mean_k(∂L/∂ŝ_k ŝ_k)) / σ
        let mut ds_sum = 0.0;
        for i in 0..n {
            let dn = dout[[i, j]] * p.scale[j];
            let ds = (dn - t.normalized[[i, j]] * dn_dot_n / nf) / sd;
            dz[[i, j]] = ds;
            ds_sum += ds;
        }
        // s = z − α μ(z)
        grad.mean_scale[j] += -t.mean[j] * ds_sum;
        let dmu_share = -p.mean_scale[j] * ds_sum / nf;
        for i in 0..n {
            dz[[i, j]] += dmu_share;
        }
    }
    dz
}
