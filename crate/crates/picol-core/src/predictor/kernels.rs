//! Forward kernels for graph-convolution and attention layers.
//!
//! These implement the propagation rule `H' = σ(D~^-1 A~ H W)`, optionally
//! modulated entry-wise by a learned spatial weight matrix
//! `S = softmax(H Hᵀ / √d)`, and the scaled dot-product attention core
//! `softmax(Q Kᵀ / √d) V` with optional causal masking. Softmax rows are
//! computed with max-subtraction.

use ndarray::{Array2, Axis};
use thiserror::Error;

use crate::network::EdgeAdjacency;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }
}

/// One graph-convolution layer: a weight matrix plus the row-normalized
/// adjacency `D~^-1 A~` (row-stochastic by construction).
#[derive(Clone, Debug)]
pub struct GraphConvLayer {
    pub weights: Array2<f64>,
    pub norm_adj: Array2<f64>,
}

impl GraphConvLayer {
    pub fn new(adj: &EdgeAdjacency, weights: Array2<f64>) -> Self {
        GraphConvLayer { weights, norm_adj: adj.normalized() }
    }
}

/// Row-wise softmax of `H Hᵀ / √d`; every row sums to 1.
#[derive(Clone, Debug)]
pub struct SpatialWeightMatrix {
    pub s: Array2<f64>,
}

fn softmax_rows(mut scores: Array2<f64>) -> Array2<f64> {
    for mut row in scores.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    scores
}

pub fn spatial_weights(h: &Array2<f64>) -> SpatialWeightMatrix {
    let d = h.ncols() as f64;
    let scores = h.dot(&h.t()) / d.sqrt();
    SpatialWeightMatrix { s: softmax_rows(scores) }
}

/// `σ(((D~^-1 A~) ⊙ S) H W)`; plain propagation when `spatial` is `None`.
pub fn graph_conv_forward(
    h: &Array2<f64>,
    layer: &GraphConvLayer,
    spatial: Option<&SpatialWeightMatrix>,
    activation: Activation,
) -> Result<Array2<f64>, KernelError> {
    let e = layer.norm_adj.nrows();
    if h.nrows() != e {
        return Err(KernelError::ShapeMismatch(format!(
            "H has {} rows, adjacency is {e}x{e}",
            h.nrows()
        )));
    }
    if layer.weights.nrows() != h.ncols() {
        return Err(KernelError::ShapeMismatch(format!(
            "H has {} cols, W has {} rows",
            h.ncols(),
            layer.weights.nrows()
        )));
    }
    let prop = match spatial {
        Some(sw) => {
            if sw.s.dim() != layer.norm_adj.dim() {
                return Err(KernelError::ShapeMismatch(format!(
                    "spatial matrix {:?} vs adjacency {:?}",
                    sw.s.dim(),
                    layer.norm_adj.dim()
                )));
            }
            &layer.norm_adj * &sw.s
        }
        None => layer.norm_adj.clone(),
    };
    let mut out = prop.dot(h).dot(&layer.weights);
    out.mapv_inplace(|x| activation.apply(x));
    Ok(out)
}

/// `softmax(Q Kᵀ / √d) V`. With `causal`, query row `i` attends only to key
/// columns `j <= i`.
pub fn scaled_dot_attention(
    q: &Array2<f64>,
    k: &Array2<f64>,
    v: &Array2<f64>,
    causal: bool,
) -> Result<Array2<f64>, KernelError> {
    if q.ncols() != k.ncols() {
        return Err(KernelError::ShapeMismatch(format!(
            "query dim {} vs key dim {}",
            q.ncols(),
            k.ncols()
        )));
    }
    if k.nrows() != v.nrows() {
        return Err(KernelError::ShapeMismatch(format!(
            "{} keys vs {} value rows",
            k.nrows(),
            v.nrows()
        )));
    }
    let d = q.ncols() as f64;
    let mut scores = q.dot(&k.t()) / d.sqrt();
    if causal {
        for ((i, j), s) in scores.indexed_iter_mut() {
            if j > i {
                *s = f64::NEG_INFINITY;
            }
        }
    }
    let attn = softmax_rows(scores);
    Ok(attn.dot(v))
}

/// Row sums, handy for checking stochasticity in tests and callers.
pub fn row_sums(m: &Array2<f64>) -> Vec<f64> {
    m.sum_axis(Axis(1)).to_vec()
}
