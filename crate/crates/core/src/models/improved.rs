//! Precomputed-propagation model: a k-step walk state replaces the layer
//! stack, and the aggregation groups by endpoint node type.

use ndarray::Array2;

use crate::graph::HinGraph;
use crate::models::naive::GroupedEmbedding;
use crate::models::Activation;
use crate::propagation::PropagationState;
use crate::sparse::SparseRowMatrix;

/// Split `S * H0` into per-endpoint-type column blocks:
/// `block_t(u) = sum_{v: type(v)=t} s_uv h0_v`.
pub fn grouped_propagate(
    state: &PropagationState,
    h0: &Array2<f64>,
    graph: &HinGraph,
) -> GroupedEmbedding {
    grouped_propagate_matrix(&state.matrix, h0, graph)
}

pub(crate) fn grouped_propagate_matrix(
    s: &SparseRowMatrix,
    h0: &Array2<f64>,
    graph: &HinGraph,
) -> GroupedEmbedding {
    let n = s.n_rows();
    let width = h0.ncols();
    let f = graph.num_types();
    let mut blocks = vec![Array2::<f64>::zeros((n, width)); f];
    for u in 0..n {
        for (v, val) in s.iter_row(u) {
            blocks[graph.type_of(v)]
                .row_mut(u)
                .scaled_add(val, &h0.row(v));
        }
    }
    GroupedEmbedding {
        blocks,
        labels: graph.type_names().to_vec(),
    }
}

pub(crate) fn grouped_propagate_backward(
    s: &SparseRowMatrix,
    graph: &HinGraph,
    d_blocks: &[ndarray::ArrayView2<f64>],
    width: usize,
) -> Array2<f64> {
    let mut d_h0 = Array2::<f64>::zeros((s.n_cols(), width));
    for u in 0..s.n_rows() {
        for (v, val) in s.iter_row(u) {
            let t = graph.type_of(v);
            d_h0.row_mut(v).scaled_add(val, &d_blocks[t].row(u));
        }
    }
    d_h0
}

pub(crate) struct ImprovedCache {
    pub g: Array2<f64>,
    pub t: Array2<f64>,
}

pub(crate) fn improved_forward_cached(
    s: &SparseRowMatrix,
    x: &Array2<f64>,
    w: &Array2<f64>,
    graph: &HinGraph,
    activation: Activation,
) -> (Array2<f64>, ImprovedCache) {
    let g = grouped_propagate_matrix(s, x, graph).concatenate();
    let t = g.dot(w);
    let h = t.mapv(|v| activation.apply(v));
    (h, ImprovedCache { g, t })
}

pub(crate) fn improved_backward(
    s: &SparseRowMatrix,
    w: &Array2<f64>,
    graph: &HinGraph,
    activation: Activation,
    cache: &ImprovedCache,
    d_out: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let d_t = d_out * &cache.t.mapv(|v| activation.grad(v));
    let d_w = cache.g.t().dot(&d_t);
    let d_g = d_t.dot(&w.t());
    let width = w.nrows() / graph.num_types();
    let views: Vec<_> = (0..graph.num_types())
        .map(|t| d_g.slice(ndarray::s![.., t * width..(t + 1) * width]))
        .collect();
    let d_x = grouped_propagate_backward(s, graph, &views, width);
    (d_x, d_w)
}

/// `H = act((S o H0) W)`: one aggregation over the precomputed walk state.
pub fn improved_forward(
    state: &PropagationState,
    x: &Array2<f64>,
    w: &Array2<f64>,
    graph: &HinGraph,
    activation: Activation,
) -> Array2<f64> {
    improved_forward_cached(&state.matrix, x, w, graph, activation).0
}
