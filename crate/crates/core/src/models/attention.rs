//! Node-level attention over the support of the propagation state.
//!
//! Within each endpoint-type group, the walk-weighted sum is replaced by a
//! learned softmax over the walk support `N_u^(t) = {v : s_uv > 0,
//! type(v) = t}`. The projection matrix is shared across groups and heads;
//! each (group, head) pair carries its own scoring vector. Head outputs
//! are concatenated inside each group, groups are concatenated in
//! canonical type order.

use ndarray::{s, Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::HinGraph;
use crate::models::{Activation, DropoutPlan};
use crate::propagation::PropagationState;
use crate::sparse::SparseRowMatrix;

/// Negative slope of the score rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct AttentionParams {
    /// Shared projection, `hidden x head_dim`.
    pub proj: Array2<f64>,
    /// Per endpoint-type group: `heads x 2*head_dim` scoring vectors.
    pub mu: Vec<Array2<f64>>,
}

impl AttentionParams {
    pub fn heads(&self) -> usize {
        self.mu.first().map_or(0, |m| m.nrows())
    }

    pub fn head_dim(&self) -> usize {
        self.proj.ncols()
    }
}

fn leaky_relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Importance score `leaky_relu(mu . [W h_u || W h_v])`.
pub fn attention_score(
    h_u: ndarray::ArrayView1<f64>,
    h_v: ndarray::ArrayView1<f64>,
    mu: ndarray::ArrayView1<f64>,
    w: &Array2<f64>,
) -> f64 {
    let pu = h_u.dot(w);
    let pv = h_v.dot(w);
    let d = pu.len();
    debug_assert_eq!(mu.len(), 2 * d);
    let pre = mu.slice(s![..d]).dot(&pu) + mu.slice(s![d..]).dot(&pv);
    leaky_relu(pre)
}

/// Softmax normalization of the scores over one neighborhood.
pub fn attention_weights(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    Ok(softmax_slice(scores))
}

fn softmax_slice(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = scores.iter().map(|&e| (e - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Weighted aggregation `act(sum_v alpha_v (W h_v))`; `projected` holds the
/// already-projected neighbor rows.
pub fn attention_aggregate(
    alpha: &[f64],
    projected: &Array2<f64>,
    activation: Activation,
) -> Array1<f64> {
    assert_eq!(alpha.len(), projected.nrows());
    let mut out = Array1::<f64>::zeros(projected.ncols());
    for (i, &a) in alpha.iter().enumerate() {
        out.scaled_add(a, &projected.row(i));
    }
    out.mapv_inplace(|v| activation.apply(v));
    out
}

/// Concatenation of independent head outputs.
pub fn multi_head(heads: &[Array1<f64>]) -> Array1<f64> {
    assert!(!heads.is_empty());
    let width: usize = heads.iter().map(|h| h.len()).sum();
    let mut out = Array1::zeros(width);
    let mut offset = 0;
    for h in heads {
        out.slice_mut(s![offset..offset + h.len()]).assign(h);
        offset += h.len();
    }
    out
}

pub(crate) struct HeadCache {
    /// Pre-rectifier scores, aligned with the support lists.
    pub z: Vec<Vec<f64>>,
    /// Softmax weights before dropout.
    pub alpha: Vec<Vec<f64>>,
    /// Inverted-dropout factors (all ones in evaluation mode).
    pub factor: Vec<Vec<f64>>,
    /// Pre-activation aggregation sums, `n x head_dim`.
    pub pre: Array2<f64>,
}

pub(crate) struct GiamCache {
    /// Projected features `X W`.
    pub p: Array2<f64>,
    /// `support[t][u]`: the walk support of u restricted to type t.
    pub support: Vec<Vec<Vec<usize>>>,
    /// Caches per (group, head).
    pub heads: Vec<Vec<HeadCache>>,
}

pub(crate) fn giam_forward_cached(
    state: &SparseRowMatrix,
    x: &Array2<f64>,
    att: &AttentionParams,
    graph: &HinGraph,
    activation: Activation,
    mut dropout: Option<&mut DropoutPlan<'_>>,
) -> (Array2<f64>, GiamCache) {
    let n = state.n_rows();
    let f = graph.num_types();
    let k_heads = att.heads();
    let d = att.head_dim();
    let p = x.dot(&att.proj);

    let mut support: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); n]; f];
    for u in 0..n {
        for (v, val) in state.iter_row(u) {
            if val > 0.0 {
                support[graph.type_of(v)][u].push(v);
            }
        }
    }

    let mut out = Array2::<f64>::zeros((n, f * k_heads * d));
    let mut heads: Vec<Vec<HeadCache>> = Vec::with_capacity(f);
    for (t, support_t) in support.iter().enumerate() {
        let mut per_head = Vec::with_capacity(k_heads);
        for kappa in 0..k_heads {
            let mu_row = att.mu[t].row(kappa);
            let a = mu_row.slice(s![..d]);
            let b = mu_row.slice(s![d..]);
            let ap = p.dot(&a);
            let bp = p.dot(&b);
            let mut hc = HeadCache {
                z: vec![Vec::new(); n],
                alpha: vec![Vec::new(); n],
                factor: vec![Vec::new(); n],
                pre: Array2::zeros((n, d)),
            };
            let col0 = (t * k_heads + kappa) * d;
            for u in 0..n {
                let nbrs = &support_t[u];
                if nbrs.is_empty() {
                    continue;
                }
                let z: Vec<f64> = nbrs.iter().map(|&v| ap[u] + bp[v]).collect();
                let scores: Vec<f64> = z.iter().map(|&zi| leaky_relu(zi)).collect();
                let alpha = softmax_slice(&scores);
                let factor: Vec<f64> = match dropout.as_deref_mut() {
                    Some(plan) if plan.rate > 0.0 => {
                        let keep = 1.0 - plan.rate;
                        nbrs.iter()
                            .map(|_| {
                                if plan.rng.gen::<f64>() < plan.rate {
                                    0.0
                                } else {
                                    1.0 / keep
                                }
                            })
                            .collect()
                    }
                    _ => vec![1.0; nbrs.len()],
                };
                {
                    let mut pre_row = hc.pre.row_mut(u);
                    for (i, &v) in nbrs.iter().enumerate() {
                        pre_row.scaled_add(alpha[i] * factor[i], &p.row(v));
                    }
                }
                for j in 0..d {
                    out[[u, col0 + j]] = activation.apply(hc.pre[[u, j]]);
                }
                hc.z[u] = z;
                hc.alpha[u] = alpha;
                hc.factor[u] = factor;
            }
            per_head.push(hc);
        }
        heads.push(per_head);
    }
    (out, GiamCache { p, support, heads })
}

pub(crate) fn giam_backward(
    x: &Array2<f64>,
    att: &AttentionParams,
    activation: Activation,
    cache: &GiamCache,
    d_out: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Vec<Array2<f64>>) {
    let n = x.nrows();
    let f = cache.support.len();
    let k_heads = att.heads();
    let d = att.head_dim();
    let p = &cache.p;

    let mut d_p = Array2::<f64>::zeros((n, d));
    let mut d_mu: Vec<Array2<f64>> = att.mu.iter().map(|m| Array2::zeros(m.dim())).collect();

    for t in 0..f {
        for kappa in 0..k_heads {
            let hc = &cache.heads[t][kappa];
            let mu_row = att.mu[t].row(kappa);
            let col0 = (t * k_heads + kappa) * d;
            let mut d_mu_a = vec![0.0f64; d];
            let mut d_mu_b = vec![0.0f64; d];
            for u in 0..n {
                let nbrs = &cache.support[t][u];
                if nbrs.is_empty() {
                    continue;
                }
                let alpha = &hc.alpha[u];
                let factor = &hc.factor[u];
                let z = &hc.z[u];
                let g: Vec<f64> = (0..d)
                    .map(|j| d_out[[u, col0 + j]] * activation.grad(hc.pre[[u, j]]))
                    .collect();
                // Value path and distributed softmax gradient.
                let mut d_alpha = vec![0.0f64; nbrs.len()];
                for (i, &v) in nbrs.iter().enumerate() {
                    let mut dot = 0.0;
                    for (j, gj) in g.iter().enumerate() {
                        dot += gj * p[[v, j]];
                    }
                    let weighted = alpha[i] * factor[i];
                    for (j, gj) in g.iter().enumerate() {
                        d_p[[v, j]] += weighted * gj;
                    }
                    d_alpha[i] = dot * factor[i];
                }
                let dot_sum: f64 = alpha.iter().zip(&d_alpha).map(|(a, da)| a * da).sum();
                let mut dz_sum = 0.0;
                for (i, &v) in nbrs.iter().enumerate() {
                    let d_e = alpha[i] * (d_alpha[i] - dot_sum);
                    let d_z = d_e * leaky_grad(z[i]);
                    dz_sum += d_z;
                    for j in 0..d {
                        d_mu_b[j] += d_z * p[[v, j]];
                        d_p[[v, j]] += d_z * mu_row[d + j];
                    }
                }
                for j in 0..d {
                    d_mu_a[j] += dz_sum * p[[u, j]];
                    d_p[[u, j]] += dz_sum * mu_row[j];
                }
            }
            for j in 0..d {
                d_mu[t][[kappa, j]] += d_mu_a[j];
                d_mu[t][[kappa, d + j]] += d_mu_b[j];
            }
        }
    }
    let d_proj = x.t().dot(&d_p);
    let d_x = d_p.dot(&att.proj.t());
    (d_x, d_proj, d_mu)
}

/// Attention forward pass in evaluation mode (no dropout).
pub fn giam_forward(
    state: &PropagationState,
    x: &Array2<f64>,
    att: &AttentionParams,
    graph: &HinGraph,
    activation: Activation,
) -> Array2<f64> {
    giam_forward_cached(&state.matrix, x, att, graph, activation, None).0
}
