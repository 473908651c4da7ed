//! Shallow pooled predictor.
//!
//! For each selected feature matrix `X_k` (raw `X` or a walk view's
//! `diag(π_k) X`):
//!
//! ```text
//! Z_k = X_k Wᵀ + b            shared linear embedding, c → h
//! N_k = GraphNorm_k(Z_k)      optional, one parameter set per view
//! H_k = act(N_k)
//! p_k = pool_k(H_k)           length h
//! y   = Wₒ [p_1 ‖ … ‖ p_V] + bₒ
//! ```
//!
//! Gradients are computed by hand; `tests/gradient_check.rs` compares them
//! against central finite differences.

mod graphnorm;
pub mod metrics;
pub mod optim;
pub mod train;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Pooling, PoolingSpec, ViewSelection};
use crate::walks::{ViewBundle, ViewKind};

pub use graphnorm::{graphnorm, GraphNormParams, GRAPHNORM_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x` with output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    BinaryClassification,
}

/// Architecture choices that do not depend on the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub views: Vec<ViewKind>,
    pub pooling: Vec<Pooling>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub hidden_dim: usize,
    pub activation: Activation,
    #[serde(default)]
    pub graphnorm: bool,
    pub task: TaskKind,
}

fn default_gamma() -> f64 {
    crate::spectral::DEFAULT_GAMMA
}

impl ModelSettings {
    /// Canonical view selection and the matching pooling spec. A single
    /// pooling entry applies to every view.
    pub fn selection(&self) -> Result<(ViewSelection, PoolingSpec)> {
        let sel = ViewSelection::new(&self.views, self.gamma)?;
        if self.pooling.len() == 1 {
            return Ok((sel.clone(), PoolingSpec::uniform(self.pooling[0], &sel)));
        }
        if self.pooling.len() != self.views.len() {
            return Err(Error::InvalidConfig(format!(
                "{} pooling operators for {} views",
                self.pooling.len(),
                self.views.len()
            )));
        }
        let mut pairs: Vec<(ViewKind, Pooling)> = self.views.iter().copied().zip(self.pooling.iter().copied()).collect();
        pairs.sort_by_key(|p| p.0);
        let pools = PoolingSpec::new(pairs.into_iter().map(|p| p.1).collect(), &sel)?;
        Ok((sel, pools))
    }
}

/// Fully resolved model shape, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub settings: ModelSettings,
    pub feature_dim: usize,
    pub num_tasks: usize,
}

impl ModelConfig {
    pub fn new(settings: ModelSettings, feature_dim: usize, num_tasks: usize) -> Result<Self> {
        let cfg = Self { settings, feature_dim, num_tasks };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.settings.selection()?;
        if self.settings.hidden_dim == 0 || self.feature_dim == 0 || self.num_tasks == 0 {
            return Err(Error::InvalidConfig("hidden_dim, feature_dim and num_tasks must be positive".into()));
        }
        Ok(())
    }

    pub fn view_count(&self) -> usize {
        self.settings.views.len()
    }

    pub fn pooled_dim(&self) -> usize {
        self.view_count() * self.settings.hidden_dim
    }
}

/// Every trainable tensor. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    /// `h × c`
    pub embed_weight: Array2<f64>,
    pub embed_bias: Array1<f64>,
    /// One entry per view when GraphNorm is enabled, otherwise empty.
    pub graphnorm: Vec<GraphNormParams>,
    /// `T × (V·h)`
    pub head_weight: Array2<f64>,
    pub head_bias: Array1<f64>,
}

impl Parameters {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let h = cfg.settings.hidden_dim;
        let gn = if cfg.settings.graphnorm { cfg.view_count() } else { 0 };
        Self {
            embed_weight: Array2::zeros((h, cfg.feature_dim)),
            embed_bias: Array1::zeros(h),
            graphnorm: (0..gn)
                .map(|_| GraphNormParams {
                    scale: Array1::zeros(h),
                    shift: Array1::zeros(h),
                    mean_scale: Array1::zeros(h),
                })
                .collect(),
            head_weight: Array2::zeros((cfg.num_tasks, cfg.pooled_dim())),
            head_bias: Array1::zeros(cfg.num_tasks),
        }
    }

    /// Linear weights uniform in `±1/√fan_in`, biases zero, GraphNorm at
    /// identity (`scale = 1`, `shift = 0`, `mean_scale = 1`).
    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(cfg);
        let bound = 1.0 / (cfg.feature_dim as f64).sqrt();
        p.embed_weight.mapv_inplace(|_| rng.gen_range(-bound..=bound));
        let bound = 1.0 / (cfg.pooled_dim() as f64).sqrt();
        p.head_weight.mapv_inplace(|_| rng.gen_range(-bound..=bound));
        for gn in &mut p.graphnorm {
            gn.scale.fill(1.0);
            gn.mean_scale.fill(1.0);
        }
        p
    }

    /// Tensors in their fixed serialisation order.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = vec![
            ("embed.weight".into(), self.embed_weight.shape().to_vec(), slice(&self.embed_weight)),
            ("embed.bias".into(), self.embed_bias.shape().to_vec(), slice(&self.embed_bias)),
        ];
        for (k, gn) in self.graphnorm.iter().enumerate() {
            out.push((format!("graphnorm.{k}.scale"), gn.scale.shape().to_vec(), slice(&gn.scale)));
            out.push((format!("graphnorm.{k}.shift"), gn.shift.shape().to_vec(), slice(&gn.shift)));
            out.push((format!("graphnorm.{k}.mean_scale"), gn.mean_scale.shape().to_vec(), slice(&gn.mean_scale)));
        }
        out.push(("head.weight".into(), self.head_weight.shape().to_vec(), slice(&self.head_weight)));
        out.push(("head.bias".into(), self.head_bias.shape().to_vec(), slice(&self.head_bias)));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![slice_mut(&mut self.embed_weight), slice_mut(&mut self.embed_bias)];
        for gn in &mut self.graphnorm {
            out.push(slice_mut(&mut gn.scale));
            out.push(slice_mut(&mut gn.shift));
            out.push(slice_mut(&mut gn.mean_scale));
        }
        out.push(slice_mut(&mut self.head_weight));
        out.push(slice_mut(&mut self.head_bias));
        out
    }

    pub fn len(&self) -> usize {
        self.named_tensors().iter().map(|t| t.2.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.named_tensors().into_iter().flat_map(|t| t.2.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[at..at + len]);
            at += len;
        }
        assert_eq!(at, flat.len(), "flat parameter vector has wrong length");
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|t| t.2.iter().all(|x| x.is_finite()))
    }
}

fn slice<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are stored in standard layout")
}

fn slice_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are stored in standard layout")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShallowModel {
    pub config: ModelConfig,
    pub params: Parameters,
}

/// Intermediate values of one view, kept for the backward pass.
struct ViewTrace {
    norm: Option<graphnorm::Trace>,
    /// pre-activation
    pre: Array2<f64>,
    /// post-activation
    post: Array2<f64>,
}

pub(crate) struct ForwardTrace {
    views: Vec<ViewTrace>,
    pooled: Array1<f64>,
}

impl ShallowModel {
    /// Fresh model with parameters drawn from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = Parameters::init(&config, &mut rng);
        Ok(Self { config, params })
    }

    pub fn with_params(config: ModelConfig, params: Parameters) -> Result<Self> {
        config.validate()?;
        let expect = Parameters::zeros(&config);
        let shapes = |p: &Parameters| p.named_tensors().into_iter().map(|t| (t.0, t.1)).collect::<Vec<_>>();
        if shapes(&expect) != shapes(&params) {
            return Err(Error::DimensionMismatch("parameter shapes do not match the model configuration".into()));
        }
        Ok(Self { config, params })
    }

    /// The model's feature matrices drawn from a bundle, in selection order.
    pub fn inputs<'a>(&self, bundle: &'a ViewBundle) -> Result<Vec<ArrayView2<'a, f64>>> {
        let (sel, _) = self.config.settings.selection()?;
        sel.kinds().iter().map(|&k| bundle.feature_matrix(k).map(|m| m.view())).collect()
    }

    pub fn forward_bundle(&self, bundle: &ViewBundle) -> Result<Array1<f64>> {
        self.forward(&self.inputs(bundle)?)
    }

    /// Prediction vector of length `T` for one graph.
    pub fn forward(&self, inputs: &[ArrayView2<'_, f64>]) -> Result<Array1<f64>> {
        Ok(self.forward_traced(inputs)?.0)
    }

    pub(crate) fn forward_traced(&self, inputs: &[ArrayView2<'_, f64>]) -> Result<(Array1<f64>, ForwardTrace)> {
        let cfg = &self.config;
        if inputs.len() != cfg.view_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature matrices for {} views",
                inputs.len(),
                cfg.view_count()
            )));
        }
        let (_, pools) = cfg.settings.selection()?;
        let h = cfg.settings.hidden_dim;
        let act = cfg.settings.activation;
        let mut pooled = Array1::zeros(cfg.pooled_dim());
        let mut views = Vec::with_capacity(inputs.len());
        for (k, x) in inputs.iter().enumerate() {
            if x.ncols() != cfg.feature_dim || x.nrows() == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "view {k} is {}x{}, model expects {} columns",
                    x.nrows(),
                    x.ncols(),
                    cfg.feature_dim
                )));
            }
            let z = x.dot(&self.params.embed_weight.t()) + &self.params.embed_bias;
            let (pre, norm) = match self.params.graphnorm.get(k) {
                Some(gn) => {
                    let (out, trace) = graphnorm::forward(z.view(), gn);
                    (out, Some(trace))
                }
                None => (z, None),
            };
            let post = pre.mapv(|v| act.apply(v));
            pooled
                .slice_mut(ndarray::s![k * h..(k + 1) * h])
                .assign(&crate::features::pool(post.view(), pools.ops()[k]));
            views.push(ViewTrace { norm, pre, post });
        }
        let y = self.params.head_weight.dot(&pooled) + &self.params.head_bias;
        Ok((y, ForwardTrace { views, pooled }))
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂y` for one graph.
    pub(crate) fn backward(
        &self,
        inputs: &[ArrayView2<'_, f64>],
        trace: &ForwardTrace,
        dy: &Array1<f64>,
        grad: &mut Parameters,
    ) -> Result<()> {
        let cfg = &self.config;
        let (_, pools) = cfg.settings.selection()?;
        let h = cfg.settings.hidden_dim;
        let act = cfg.settings.activation;

        grad.head_bias += dy;
        grad.head_weight += &outer(dy, &trace.pooled);
        let dpooled = self.params.head_weight.t().dot(dy);

        for (k, (x, vt)) in inputs.iter().zip(&trace.views).enumerate() {
            let dp = dpooled.slice(ndarray::s![k * h..(k + 1) * h]);
            let dpost = pool_backward(vt.post.view(), pools.ops()[k], dp.to_owned());
            let mut dpre = dpost;
            ndarray::Zip::from(&mut dpre)
                .and(&vt.pre)
                .and(&vt.post)
                .for_each(|d, &a, &b| *d *= act.derivative(a, b));
            let dz = match (&vt.norm, self.params.graphnorm.get(k)) {
                (Some(t), Some(gn)) => graphnorm::backward(dpre.view(), t, gn, &mut grad.graphnorm[k]),
                _ => dpre,
            };
            grad.embed_bias += &dz.sum_axis(Axis(0));
            grad.embed_weight += &dz.t().dot(x);
        }
        Ok(())
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

/// `∂L/∂H` from `∂L/∂p` for one pooling operator. Max routes the gradient
/// to the first row attaining the column maximum.
fn pool_backward(post: ArrayView2<'_, f64>, op: Pooling, dp: Array1<f64>) -> Array2<f64> {
    let (n, h) = post.dim();
    let nf = n as f64;
    let mut out = Array2::zeros((n, h));
    let argmax = |j: usize| {
        let col = post.column(j);
        let mut best = 0;
        for i in 1..n {
            if col[i] > col[best] {
                best = i;
            }
        }
        best
    };
    for j in 0..h {
        match op {
            Pooling::Sum => out.column_mut(j).fill(dp[j]),
            Pooling::Mean => out.column_mut(j).fill(dp[j] / nf),
            Pooling::Max => out[[argmax(j), j]] = dp[j],
            Pooling::MeanScaledByMax => {
                let col = post.column(j);
                let mean = col.sum() / nf;
                let best = argmax(j);
                let max = col[best];
                out.column_mut(j).fill(dp[j] * max / nf);
                out[[best, j]] += dp[j] * mean;
            }
        }
    }
    out
}

/// Arithmetic mean of the members' predictions.
pub fn ensemble_predict(models: &[ShallowModel], bundle: &ViewBundle) -> Result<Array1<f64>> {
    let (first, rest) = models.split_first().ok_or(Error::EmptyEnsemble)?;
    let mut sum = first.forward_bundle(bundle)?;
    for m in rest {
        if m.config != first.config {
            return Err(Error::DimensionMismatch("ensemble members have different configurations".into()));
        }
        sum += &m.forward_bundle(bundle)?;
    }
    Ok(sum / models.len() as f64)
}
