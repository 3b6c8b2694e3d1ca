//! Candidate meta-path mode: the walk runs on a derived graph whose edge
//! set is the union of the candidate meta-path adjacencies, restricted to
//! the node types those paths start and end at.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::graph::{EdgeRecord, HinGraph, MetaPath, NodeRecord};
use crate::models::features::{FeatureBlock, FeatureSet};
use crate::propagation::{constrained_walk, NullTransition, PropagationState, TransitionMatrix};

/// A propagation state over the candidate-derived node subset, with the
/// mapping back to the parent graph.
#[derive(Debug, Clone)]
pub struct CandidateState {
    pub state: PropagationState,
    /// Canonical parent indices of the derived nodes, in derived order.
    pub nodes: Vec<usize>,
    /// The derived graph (node types preserved from the parent).
    pub graph: HinGraph,
}

/// Union the candidate meta-path adjacencies into an edge set over the
/// endpoint-type nodes, then run the standard constrained pipeline on the
/// derived graph.
pub fn candidate_metapath_state(
    graph: &HinGraph,
    paths: &[MetaPath],
    k: usize,
) -> Result<CandidateState> {
    let derived = derive_graph(graph, paths)?;
    let aug = derived.graph.augment();
    let p = TransitionMatrix::new(&aug);
    let q = NullTransition::new(&aug);
    let state = constrained_walk(&p, &q, k);
    Ok(CandidateState {
        state,
        nodes: derived.nodes,
        graph: derived.graph,
    })
}

struct DerivedGraph {
    graph: HinGraph,
    nodes: Vec<usize>,
}

fn derive_graph(graph: &HinGraph, paths: &[MetaPath]) -> Result<DerivedGraph> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument(
            "candidate set must name at least one meta-path".into(),
        ));
    }
    let mut types: Vec<usize> = paths
        .iter()
        .flat_map(|p| [p.start_type(), p.end_type()])
        .collect();
    types.sort_unstable();
    types.dedup();

    let mut nodes: Vec<usize> = Vec::new();
    for &t in &types {
        nodes.extend(graph.type_range(t));
    }
    nodes.sort_unstable();

    let mut edges: Vec<(usize, usize)> = Vec::new();
    for path in paths {
        let adj = graph.meta_path_adjacency(path)?;
        let start = graph.type_range(path.start_type()).start;
        let end = graph.type_range(path.end_type()).start;
        for (lu, lv, _) in adj.iter() {
            let (u, v) = (start + lu, end + lv);
            if u != v {
                edges.push((u.min(v), u.max(v)));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    if edges.is_empty() {
        return Err(Error::EmptyCandidateUnion);
    }

    let node_records: Vec<NodeRecord> = nodes
        .iter()
        .map(|&u| NodeRecord::new(graph.node_id(u), &graph.type_names()[graph.type_of(u)]))
        .collect();
    let edge_records: Vec<EdgeRecord> = edges
        .iter()
        .map(|&(u, v)| EdgeRecord::new(graph.node_id(u), graph.node_id(v)))
        .collect();
    let derived = HinGraph::build(&node_records, &edge_records)?;
    // Canonical order of the derived graph preserves the parent's
    // type-and-input order, so derived index i maps to `nodes[i]`.
    debug_assert!(nodes
        .iter()
        .enumerate()
        .all(|(i, &u)| derived.node_id(i) == graph.node_id(u)));
    Ok(DerivedGraph {
        graph: derived,
        nodes,
    })
}

/// Restrict a parent-graph feature set to the derived node set.
pub fn restrict_features(
    features: &FeatureSet,
    parent: &HinGraph,
    derived: &HinGraph,
) -> Result<FeatureSet> {
    let blocks = derived
        .type_names()
        .iter()
        .map(|name| {
            let t = parent
                .type_id(name)
                .ok_or_else(|| Error::UnknownNodeType(name.clone()))?;
            Ok(match features.block(t) {
                FeatureBlock::Dense(m) => FeatureBlock::Dense(m.clone()),
                FeatureBlock::OneHot(n) => FeatureBlock::OneHot(*n),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureSet::new(blocks, derived)
}

/// Convex combination of per-meta-path embeddings under softmax weights.
pub fn giam3_forward(per_path: &[Array2<f64>], logits: &Array1<f64>) -> Array2<f64> {
    assert_eq!(per_path.len(), logits.len());
    assert!(!per_path.is_empty());
    let weights = softmax_logits(logits);
    let mut out = Array2::<f64>::zeros(per_path[0].dim());
    for (h, &w) in per_path.iter().zip(&weights) {
        out.scaled_add(w, h);
    }
    out
}

pub(crate) fn softmax_logits(logits: &Array1<f64>) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
