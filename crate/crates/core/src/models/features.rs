//! Per-type raw feature blocks and their projection to a common width.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::HinGraph;

/// Raw features of one node type. Featureless types carry an implicit
/// one-hot identity block, so their projection matrix doubles as an
/// embedding table and the identity is never materialized.
#[derive(Debug, Clone)]
pub enum FeatureBlock {
    Dense(Array2<f64>),
    OneHot(usize),
}

impl FeatureBlock {
    pub fn rows(&self) -> usize {
        match self {
            FeatureBlock::Dense(m) => m.nrows(),
            FeatureBlock::OneHot(n) => *n,
        }
    }

    pub fn raw_dim(&self) -> usize {
        match self {
            FeatureBlock::Dense(m) => m.ncols(),
            FeatureBlock::OneHot(n) => *n,
        }
    }
}

/// One feature block per node type, indexed by type id.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    blocks: Vec<FeatureBlock>,
}

impl FeatureSet {
    pub fn new(blocks: Vec<FeatureBlock>, graph: &HinGraph) -> Result<Self> {
        if blocks.len() != graph.num_types() {
            return Err(Error::ShapeMismatch {
                context: "feature set".into(),
                expected: format!("{} type blocks", graph.num_types()),
                got: format!("{}", blocks.len()),
            });
        }
        for (t, block) in blocks.iter().enumerate() {
            let expected = graph.type_range(t).len();
            if block.rows() != expected {
                return Err(Error::ShapeMismatch {
                    context: format!("feature block for type {}", graph.type_names()[t]),
                    expected: format!("{expected} rows"),
                    got: format!("{}", block.rows()),
                });
            }
            if let FeatureBlock::Dense(m) = block {
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite feature value in type {}",
                        graph.type_names()[t]
                    )));
                }
            }
        }
        Ok(Self { blocks })
    }

    /// One-hot identity blocks for every type.
    pub fn one_hot(graph: &HinGraph) -> Self {
        let blocks = (0..graph.num_types())
            .map(|t| FeatureBlock::OneHot(graph.type_range(t).len()))
            .collect();
        Self { blocks }
    }

    pub fn block(&self, type_id: usize) -> &FeatureBlock {
        &self.blocks[type_id]
    }

    pub fn num_types(&self) -> usize {
        self.blocks.len()
    }

    pub fn raw_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.raw_dim()).collect()
    }
}

/// Map every type's raw features through its projection matrix and
/// assemble the rows in canonical node order (`n x hidden`).
pub fn project_features(
    features: &FeatureSet,
    projections: &[Array2<f64>],
    graph: &HinGraph,
) -> Result<Array2<f64>> {
    if projections.len() != features.num_types() {
        return Err(Error::ShapeMismatch {
            context: "type projections".into(),
            expected: format!("{} matrices", features.num_types()),
            got: format!("{}", projections.len()),
        });
    }
    let hidden = projections
        .first()
        .map(|w| w.ncols())
        .ok_or_else(|| Error::InvalidArgument("no node types".into()))?;
    let mut out = Array2::zeros((graph.node_count(), hidden));
    for t in 0..features.num_types() {
        let w = &projections[t];
        let block = features.block(t);
        if w.nrows() != block.raw_dim() || w.ncols() != hidden {
            return Err(Error::ShapeMismatch {
                context: format!("projection for type {}", graph.type_names()[t]),
                expected: format!("{}x{hidden}", block.raw_dim()),
                got: format!("{}x{}", w.nrows(), w.ncols()),
            });
        }
        let range = graph.type_range(t);
        match block {
            FeatureBlock::Dense(m) => {
                let projected = m.dot(w);
                out.slice_mut(ndarray::s![range.start..range.end, ..])
                    .assign(&projected);
            }
            FeatureBlock::OneHot(_) => {
                out.slice_mut(ndarray::s![range.start..range.end, ..]).assign(w);
            }
        }
    }
    Ok(out)
}

/// Gradients of the projection matrices given the gradient of the
/// projected matrix.
pub(crate) fn project_backward(
    features: &FeatureSet,
    graph: &HinGraph,
    d_projected: &Array2<f64>,
) -> Vec<Array2<f64>> {
    (0..features.num_types())
        .map(|t| {
            let range = graph.type_range(t);
            let d_block = d_projected.slice(ndarray::s![range.start..range.end, ..]);
            match features.block(t) {
                FeatureBlock::Dense(m) => m.t().dot(&d_block),
                FeatureBlock::OneHot(_) => d_block.to_owned(),
            }
        })
        .collect()
}
