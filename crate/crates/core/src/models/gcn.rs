//! Two-layer graph convolution baseline over the symmetrically normalized
//! augmented adjacency.

use ndarray::Array2;

use crate::graph::AugmentedAdjacency;
use crate::models::{softmax_rows, Activation};
use crate::sparse::SparseRowMatrix;

pub(crate) struct GcnCache {
    /// `A_hat X`.
    pub ax: Array2<f64>,
    /// First-layer pre-activation `A_hat X W0`.
    pub t1: Array2<f64>,
}

/// Embedding half of the two-layer stack: `H = A_hat act(A_hat X W0)`.
pub(crate) fn gcn_embed_cached(
    ahat: &SparseRowMatrix,
    x: &Array2<f64>,
    w0: &Array2<f64>,
    activation: Activation,
) -> (Array2<f64>, GcnCache) {
    let ax = ahat.mul_dense(x);
    let t1 = ax.dot(w0);
    let a1 = t1.mapv(|v| activation.apply(v));
    let h = ahat.mul_dense(&a1);
    (h, GcnCache { ax, t1 })
}

pub(crate) fn gcn_embed_backward(
    ahat: &SparseRowMatrix,
    w0: &Array2<f64>,
    activation: Activation,
    cache: &GcnCache,
    d_h: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let d_a1 = ahat.tr_mul_dense(d_h);
    let d_t1 = &d_a1 * &cache.t1.mapv(|v| activation.grad(v));
    let d_w0 = cache.ax.t().dot(&d_t1);
    let d_ax = d_t1.dot(&w0.t());
    let d_x = ahat.tr_mul_dense(&d_ax);
    (d_x, d_w0)
}

/// Full two-layer forward pass:
/// `softmax(A_hat act(A_hat H0 W0) W1)`, rows summing to one.
pub fn gcn_forward(
    aug: &AugmentedAdjacency,
    h0: &Array2<f64>,
    w0: &Array2<f64>,
    w1: &Array2<f64>,
    activation: Activation,
) -> Array2<f64> {
    let ahat = aug.normalized();
    let (h, _) = gcn_embed_cached(&ahat, h0, w0, activation);
    softmax_rows(&h.dot(w1))
}
