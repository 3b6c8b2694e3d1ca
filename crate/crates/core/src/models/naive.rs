//! Layered model: per-layer discriminative aggregation over the one-hop
//! meta-path groups, stacked to reach longer compositional relations.
//!
//! Intra aggregation sums degree-normalized neighbor embeddings within one
//! one-hop meta-path group; inter aggregation concatenates the groups in a
//! fixed canonical order. Groups a node cannot source stay at the zero
//! fill.

use ndarray::{concatenate, Array2, Axis};

use crate::graph::{AugmentedAdjacency, HinGraph};
use crate::models::Activation;

/// The one-hop meta-path map: every augmented edge (u, v), including the
/// self-loop, belongs to the ordered group (type(u), type(v)).
#[derive(Debug, Clone)]
pub struct GroupMap {
    pairs: Vec<(usize, usize)>,
    labels: Vec<String>,
    /// Dense lookup: `index[ta][tb]` is the group position.
    index: Vec<Vec<Option<usize>>>,
}

impl GroupMap {
    pub fn direct(graph: &HinGraph) -> Self {
        let f = graph.num_types();
        let mut present = vec![vec![false; f]; f];
        for t in 0..f {
            present[t][t] = true; // self-loops
        }
        for &(u, v) in graph.edges() {
            let (a, b) = (graph.type_of(u), graph.type_of(v));
            present[a][b] = true;
            present[b][a] = true;
        }
        let mut pairs = Vec::new();
        let mut labels = Vec::new();
        let mut index = vec![vec![None; f]; f];
        for ta in 0..f {
            for tb in 0..f {
                if present[ta][tb] {
                    index[ta][tb] = Some(pairs.len());
                    labels.push(format!(
                        "{}-{}",
                        graph.type_names()[ta],
                        graph.type_names()[tb]
                    ));
                    pairs.push((ta, tb));
                }
            }
        }
        Self {
            pairs,
            labels,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn group_of(&self, src_type: usize, dst_type: usize) -> Option<usize> {
        self.index[src_type][dst_type]
    }
}

/// Per-group embedding blocks, all `n x width`, in canonical group order.
#[derive(Debug, Clone)]
pub struct GroupedEmbedding {
    pub blocks: Vec<Array2<f64>>,
    pub labels: Vec<String>,
}

impl GroupedEmbedding {
    pub fn concatenate(&self) -> Array2<f64> {
        inter_concatenate(self)
    }

    pub fn width(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }
}

/// Degree-normalized sum over the neighbors of each one-hop meta-path
/// group: `e_u^(m) = sum_{v in N_u, tau(u,v)=m} h_v / sqrt(d_u d_v)`.
pub fn intra_aggregate(
    aug: &AugmentedAdjacency,
    h: &Array2<f64>,
    graph: &HinGraph,
    groups: &GroupMap,
) -> GroupedEmbedding {
    let n = aug.n();
    let width = h.ncols();
    let mut blocks = vec![Array2::<f64>::zeros((n, width)); groups.len()];
    for u in 0..n {
        for (v, a) in aug.matrix.iter_row(u) {
            let g = groups
                .group_of(graph.type_of(u), graph.type_of(v))
                .expect("every augmented edge has a group");
            let norm = a / (aug.degrees[u] * aug.degrees[v]).sqrt();
            blocks[g].row_mut(u).scaled_add(norm, &h.row(v));
        }
    }
    GroupedEmbedding {
        blocks,
        labels: groups.labels().to_vec(),
    }
}

/// Transpose of [`intra_aggregate`] for backpropagation.
pub(crate) fn intra_aggregate_backward(
    aug: &AugmentedAdjacency,
    graph: &HinGraph,
    groups: &GroupMap,
    d_blocks: &[ndarray::ArrayView2<f64>],
    width: usize,
) -> Array2<f64> {
    let n = aug.n();
    let mut d_h = Array2::<f64>::zeros((n, width));
    for u in 0..n {
        for (v, a) in aug.matrix.iter_row(u) {
            let g = groups
                .group_of(graph.type_of(u), graph.type_of(v))
                .expect("every augmented edge has a group");
            let norm = a / (aug.degrees[u] * aug.degrees[v]).sqrt();
            d_h.row_mut(v).scaled_add(norm, &d_blocks[g].row(u));
        }
    }
    d_h
}

/// Concatenate the group blocks in canonical group order.
pub fn inter_concatenate(grouped: &GroupedEmbedding) -> Array2<f64> {
    let views: Vec<_> = grouped.blocks.iter().map(|b| b.view()).collect();
    concatenate(Axis(1), &views).expect("group blocks share the row count")
}

pub(crate) struct NaiveCache {
    /// Concatenated group matrix per layer.
    pub gs: Vec<Array2<f64>>,
    /// Pre-activation per layer.
    pub ts: Vec<Array2<f64>>,
}

pub(crate) fn naive_forward_cached(
    aug: &AugmentedAdjacency,
    graph: &HinGraph,
    groups: &GroupMap,
    x: &Array2<f64>,
    weights: &[Array2<f64>],
    activation: Activation,
) -> (Array2<f64>, NaiveCache) {
    let mut h = x.clone();
    let mut cache = NaiveCache {
        gs: Vec::with_capacity(weights.len()),
        ts: Vec::with_capacity(weights.len()),
    };
    for w in weights {
        let g = intra_aggregate(aug, &h, graph, groups).concatenate();
        let t = g.dot(w);
        h = t.mapv(|v| activation.apply(v));
        cache.gs.push(g);
        cache.ts.push(t);
    }
    (h, cache)
}

pub(crate) fn naive_backward(
    aug: &AugmentedAdjacency,
    graph: &HinGraph,
    groups: &GroupMap,
    weights: &[Array2<f64>],
    activation: Activation,
    cache: &NaiveCache,
    d_out: &Array2<f64>,
) -> (Array2<f64>, Vec<Array2<f64>>) {
    let mut d_h = d_out.clone();
    let mut d_weights = vec![Array2::zeros((0, 0)); weights.len()];
    for layer in (0..weights.len()).rev() {
        let t = &cache.ts[layer];
        let d_t = &d_h * &t.mapv(|v| activation.grad(v));
        d_weights[layer] = cache.gs[layer].t().dot(&d_t);
        let d_g = d_t.dot(&weights[layer].t());
        // Split the concatenated gradient back into group blocks.
        let width = weights[layer].nrows() / groups.len();
        let views: Vec<_> = (0..groups.len())
            .map(|g| d_g.slice(ndarray::s![.., g * width..(g + 1) * width]))
            .collect();
        d_h = intra_aggregate_backward(aug, graph, groups, &views, width);
    }
    (d_h, d_weights)
}

/// Stacked layers of intra/inter aggregation followed by the layer map:
/// `H^(k) = act((A_hat o H^(k-1)) W^(k-1))`.
pub fn naive_forward(
    aug: &AugmentedAdjacency,
    graph: &HinGraph,
    groups: &GroupMap,
    x: &Array2<f64>,
    weights: &[Array2<f64>],
    activation: Activation,
) -> Array2<f64> {
    naive_forward_cached(aug, graph, groups, x, weights, activation).0
}
