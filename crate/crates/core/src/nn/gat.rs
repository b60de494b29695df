//! Graph attention: scoring functions, neighborhood softmax and the
//! multi-head layer recorded on a tape.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::batch::GraphBatch;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::EdgeType;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionVariant {
    /// `a^T LeakyReLU(W [x_v || x_u])`
    #[default]
    V2,
    /// `LeakyReLU(a^T [W x_v || W x_u])`
    Static,
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Dynamic score of neighbor `x_u` for target `x_v`. `w` has one row per
/// output unit over the concatenated input `[x_v || x_u]`.
pub fn gatv2_score(x_v: &[f64], x_u: &[f64], w: &[Vec<f64>], a: &[f64], slope: f64) -> Result<f64> {
    if x_v.len() != x_u.len() {
        return Err(Error::Shape(format!("x_v has {} dims, x_u {}", x_v.len(), x_u.len())));
    }
    if w.len() != a.len() {
        return Err(Error::Shape(format!("W has {} rows, a has {}", w.len(), a.len())));
    }
    let mut score = 0.0;
    for (row, &ai) in w.iter().zip(a) {
        if row.len() != 2 * x_v.len() {
            return Err(Error::Shape(format!(
                "W row has {} columns, expected {}",
                row.len(),
                2 * x_v.len()
            )));
        }
        let z: f64 = row.iter().zip(x_v.iter().chain(x_u)).map(|(wi, xi)| wi * xi).sum();
        score += ai * leaky(z, slope);
    }
    Ok(score)
}

/// Static score: `w` maps one node's features, `a` spans `[W x_v || W x_u]`.
pub fn static_score(x_v: &[f64], x_u: &[f64], w: &[Vec<f64>], a: &[f64], slope: f64) -> Result<f64> {
    if x_v.len() != x_u.len() {
        return Err(Error::Shape(format!("x_v has {} dims, x_u {}", x_v.len(), x_u.len())));
    }
    if a.len() != 2 * w.len() {
        return Err(Error::Shape(format!("a has {} entries, expected {}", a.len(), 2 * w.len())));
    }
    let project = |x: &[f64]| -> Result<Vec<f64>> {
        w.iter()
            .map(|row| {
                if row.len() != x.len() {
                    return Err(Error::Shape("W width does not match features".into()));
                }
                Ok(row.iter().zip(x).map(|(a, b)| a * b).sum())
            })
            .collect()
    };
    let (pv, pu) = (project(x_v)?, project(x_u)?);
    let z: f64 = pv.iter().chain(&pu).zip(a).map(|(p, ai)| p * ai).sum();
    Ok(leaky(z, slope))
}

/// Softmax over a neighborhood's scores.
pub fn attention_normalize<K: Ord + Clone>(scores: &BTreeMap<K, f64>) -> Result<BTreeMap<K, f64>> {
    let max = scores
        .values()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if scores.is_empty() {
        return Err(Error::Structure("softmax over an empty neighborhood".into()));
    }
    let exps: Vec<f64> = scores.values().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(scores.keys().cloned().zip(exps.into_iter().map(|e| e / total)).collect())
}

/// Normalized coefficients of one attention layer, `[edges, heads]`
/// row-major, aligned with the batch's edge order.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerAttention {
    pub heads: usize,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub kind: Vec<EdgeType>,
    pub alpha: Vec<f64>,
}

impl LayerAttention {
    pub fn n_edges(&self) -> usize {
        self.src.len()
    }

    pub fn coefficient(&self, edge: usize, head: usize) -> f64 {
        self.alpha[edge * self.heads + head]
    }

    pub fn head_mean(&self, edge: usize) -> f64 {
        let row = &self.alpha[edge * self.heads..(edge + 1) * self.heads];
        row.iter().sum::<f64>() / self.heads as f64
    }

    /// `(src, dst) -> coefficient` map for one head.
    pub fn head_map(&self, head: usize) -> BTreeMap<(usize, usize), f64> {
        (0..self.n_edges())
            .map(|e| ((self.src[e], self.dst[e]), self.coefficient(e, head)))
            .collect()
    }

    /// Sum of incoming coefficients per target node and head, `[nodes][heads]`.
    pub fn target_sums(&self, n_nodes: usize) -> Vec<Vec<f64>> {
        let mut sums = vec![vec![0.0; self.heads]; n_nodes];
        for e in 0..self.n_edges() {
            for h in 0..self.heads {
                sums[self.dst[e]][h] += self.coefficient(e, h);
            }
        }
        sums
    }

    /// Largest deviation of any per-target sum from one.
    pub fn max_normalization_error(&self, n_nodes: usize) -> f64 {
        self.target_sums(n_nodes)
            .iter()
            .flatten()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Tape handles for one attention layer's parameters.
pub(crate) struct GatLayerVars {
    /// Target-side projection (dynamic variant only).
    pub w_dst: Option<Var>,
    pub w_src: Var,
    pub w_type: Option<Var>,
    /// `att` for the dynamic variant; `(att_dst, att_src)` for static.
    pub att: Var,
    pub att_src: Option<Var>,
    pub bias: Var,
    pub gamma: Var,
    pub beta: Var,
}

pub(crate) struct LayerSettings {
    pub heads: usize,
    pub groups: usize,
    pub slope: f64,
    pub dropout: f64,
    pub variant: AttentionVariant,
}

pub(crate) fn dropout_mask<R: Rng>(rng: &mut R, rows: usize, cols: usize, p: f64) -> Tensor {
    let keep = 1.0 / (1.0 - p);
    Tensor::from_rows(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect(),
    )
}

/// Records one multi-head attention layer:
/// per head `h_v = sum_u alpha_vu (W_src x_u + W_type t_vu)`, heads
/// concatenated, bias, group norm, ELU. Dropout hits the coefficients and the
/// output features when `rng` is given.
pub(crate) fn gat_layer<R: Rng>(
    tape: &mut Tape,
    x: Var,
    batch: &GraphBatch,
    vars: &GatLayerVars,
    cfg: &LayerSettings,
    mut rng: Option<&mut R>,
) -> (Var, LayerAttention) {
    let n = batch.n_nodes;
    let src_proj = tape.matmul(x, vars.w_src);
    let mut values = tape.gather(src_proj, batch.src.clone());
    if let Some(w_type) = vars.w_type {
        let type_term = tape.gather(w_type, batch.kind.clone());
        values = tape.add(values, type_term);
    }

    let scores = match cfg.variant {
        AttentionVariant::V2 => {
            let w_dst = vars.w_dst.expect("dynamic attention needs a target projection");
            let dst_proj = tape.matmul(x, w_dst);
            let dst_rows = tape.gather(dst_proj, batch.dst.clone());
            let pre = tape.add(dst_rows, values);
            let act = tape.leaky_relu(pre, cfg.slope);
            tape.head_dot(act, vars.att, cfg.heads)
        }
        AttentionVariant::Static => {
            let att_src = vars.att_src.expect("static attention needs a source vector");
            let dst_rows = tape.gather(src_proj, batch.dst.clone());
            let s_dst = tape.head_dot(dst_rows, vars.att, cfg.heads);
            let s_src = tape.head_dot(values, att_src, cfg.heads);
            let s = tape.add(s_dst, s_src);
            tape.leaky_relu(s, cfg.slope)
        }
    };
    let mut alpha = tape.segment_softmax(scores, batch.dst.clone(), n);
    let record = LayerAttention {
        heads: cfg.heads,
        src: batch.src.to_vec(),
        dst: batch.dst.to_vec(),
        kind: batch
            .kind
            .iter()
            .map(|&k| [EdgeType::Intra, EdgeType::Cross, EdgeType::SelfLoop][k])
            .collect(),
        alpha: tape.value(alpha).data().to_vec(),
    };
    if let (Some(rng), true) = (rng.as_deref_mut(), cfg.dropout > 0.0) {
        let mask = dropout_mask(rng, batch.n_edges(), cfg.heads, cfg.dropout);
        alpha = tape.mul_const(alpha, mask);
    }
    let messages = tape.head_mul(alpha, values, cfg.heads);
    let h = tape.scatter_sum(messages, batch.dst.clone(), n);
    let h = tape.add_row(h, vars.bias);
    let h = tape.group_norm(h, vars.gamma, vars.beta, cfg.groups);
    let mut h = tape.elu(h);
    if let (Some(rng), true) = (rng, cfg.dropout > 0.0) {
        let width = tape.value(h).cols();
        let mask = dropout_mask(rng, n, width, cfg.dropout);
        h = tape.mul_const(h, mask);
    }
    (h, record)
}
