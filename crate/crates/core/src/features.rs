//! View selection, global pooling and fixed-size graph fingerprints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::walks::{ViewBundle, ViewKind};

/// Non-empty, duplicate-free set of views in canonical order `X, X₁, X₂, X_γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSelection {
    kinds: Vec<ViewKind>,
    gamma: f64,
}

impl ViewSelection {
    pub fn new(kinds: &[ViewKind], gamma: f64) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::InvalidConfig("view selection is empty".into()));
        }
        let set: BTreeSet<ViewKind> = kinds.iter().copied().collect();
        if set.len() != kinds.len() {
            return Err(Error::InvalidConfig("view selection has duplicates".into()));
        }
        if set.contains(&ViewKind::WalkGamma) {
            crate::spectral::check_gamma(gamma)?;
        }
        Ok(Self { kinds: set.into_iter().collect(), gamma })
    }

    /// Parses a comma-separated list such as `x1,x2,xg`.
    pub fn parse(list: &str, gamma: f64) -> Result<Self> {
        let kinds = list.split(',').map(str::parse).collect::<Result<Vec<ViewKind>>>()?;
        Self::new(&kinds, gamma)
    }

    pub fn kinds(&self) -> &[ViewKind] {
        &self.kinds
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Mean,
    Sum,
    Max,
    /// Elementwise product of the column mean and column max.
    MeanScaledByMax,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::Mean => "mean",
            Pooling::Sum => "sum",
            Pooling::Max => "max",
            Pooling::MeanScaledByMax => "mean_scaled_by_max",
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" | "avg" | "average" => Ok(Pooling::Mean),
            "sum" | "add" => Ok(Pooling::Sum),
            "max" => Ok(Pooling::Max),
            "mean_scaled_by_max" | "mean_max" => Ok(Pooling::MeanScaledByMax),
            other => Err(Error::InvalidConfig(format!(
                "unknown pooling {other:?} (expected mean, sum, max, mean_scaled_by_max)"
            ))),
        }
    }
}

/// One pooling operator per selected view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingSpec(Vec<Pooling>);

impl PoolingSpec {
    pub fn new(ops: Vec<Pooling>, sel: &ViewSelection) -> Result<Self> {
        if ops.len() != sel.len() {
            return Err(Error::InvalidConfig(format!(
                "{} pooling operators for {} views",
                ops.len(),
                sel.len()
            )));
        }
        Ok(Self(ops))
    }

    pub fn uniform(op: Pooling, sel: &ViewSelection) -> Self {
        Self(vec![op; sel.len()])
    }

    /// A single name applies to every view; a comma list must have one
    /// entry per view.
    pub fn parse(list: &str, sel: &ViewSelection) -> Result<Self> {
        let ops = list.split(',').map(str::parse).collect::<Result<Vec<Pooling>>>()?;
        if ops.len() == 1 {
            return Ok(Self::uniform(ops[0], sel));
        }
        Self::new(ops, sel)
    }

    pub fn ops(&self) -> &[Pooling] {
        &self.0
    }
}

/// Collapses an `n × h` node matrix to a length-`h` graph vector.
pub fn pool(x: ArrayView2<'_, f64>, op: Pooling) -> Array1<f64> {
    let n = x.nrows() as f64;
    match op {
        Pooling::Sum => x.sum_axis(Axis(0)),
        Pooling::Mean => x.sum_axis(Axis(0)) / n,
        Pooling::Max => column_max(x),
        Pooling::MeanScaledByMax => x.sum_axis(Axis(0)) / n * column_max(x),
    }
}

fn column_max(x: ArrayView2<'_, f64>) -> Array1<f64> {
    x.fold_axis(Axis(0), f64::NEG_INFINITY, |&m, &v| m.max(v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub graph_id: String,
    pub views: Vec<ViewKind>,
    pub pooling: Vec<Pooling>,
    pub gamma: f64,
    pub values: Vec<f64>,
}

/// Builds the requested views of `g` and pools each one, concatenated in
/// selection order. `g` should already be repaired.
pub fn fingerprint(id: &str, g: &AttributedGraph, sel: &ViewSelection, pools: &PoolingSpec) -> Result<Fingerprint> {
    let bundle = ViewBundle::build(g, sel.kinds(), sel.gamma())?;
    fingerprint_bundle(id, &bundle, sel, pools)
}

pub fn fingerprint_bundle(id: &str, bundle: &ViewBundle, sel: &ViewSelection, pools: &PoolingSpec) -> Result<Fingerprint> {
    if pools.ops().len() != sel.len() {
        return Err(Error::InvalidConfig("pooling spec does not match selection".into()));
    }
    let mut values = Vec::with_capacity(sel.len() * bundle.feature_dim());
    for (&kind, &op) in sel.kinds().iter().zip(pools.ops()) {
        values.extend(pool(bundle.feature_matrix(kind)?.view(), op));
    }
    Ok(Fingerprint {
        graph_id: id.to_string(),
        views: sel.kinds().to_vec(),
        pooling: pools.ops().to_vec(),
        gamma: sel.gamma(),
        values,
    })
}

/// Ordered category lists, one per attribute.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub attributes: BTreeMap<String, Vec<String>>,
}

impl Vocabulary {
    /// Sorted distinct values of each attribute across many graphs.
    pub fn collect<'a>(graphs: impl IntoIterator<Item = &'a BTreeMap<String, Vec<String>>>) -> Self {
        let mut seen: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for attrs in graphs {
            for (name, values) in attrs {
                seen.entry(name.clone()).or_default().extend(values.iter().cloned());
            }
        }
        Self {
            attributes: seen.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.attributes.values().map(Vec::len).sum()
    }
}

/// Concatenated one-hot blocks, attributes in vocabulary order.
pub fn one_hot_encode(attrs: &BTreeMap<String, Vec<String>>, vocab: &Vocabulary) -> Result<Array2<f64>> {
    let n = attrs.values().map(Vec::len).next().unwrap_or(0);
    if let Some((name, v)) = attrs.iter().find(|(_, v)| v.len() != n) {
        return Err(Error::DimensionMismatch(format!("attribute {name:?} has {} values, expected {n}", v.len())));
    }
    if let Some(name) = attrs.keys().find(|k| !vocab.attributes.contains_key(*k)) {
        return Err(Error::InvalidConfig(format!("attribute {name:?} missing from vocabulary")));
    }
    let mut out = Array2::zeros((n, vocab.width()));
    let mut offset = 0;
    for (name, categories) in &vocab.attributes {
        let values = attrs
            .get(name)
            .ok_or_else(|| Error::InvalidConfig(format!("graph lacks attribute {name:?}")))?;
        for (row, value) in values.iter().enumerate() {
            let col = categories.iter().position(|c| c == value).ok_or_else(|| Error::UnknownCategory {
                attribute: name.clone(),
                value: value.clone(),
            })?;
            out[[row, offset + col]] = 1.0;
        }
        offset += categories.len();
    }
    Ok(out)
}
