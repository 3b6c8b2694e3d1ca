//! Forward passes of the model ladder and their hand-written backward
//! passes.
//!
//! Every variant shares the same skeleton: project per-type raw features
//! to a common width, aggregate over some propagation structure, and score
//! with a linear classifier. What varies is the propagation structure: the
//! normalized adjacency applied twice (baseline), the layered one-hop
//! aggregation, a precomputed walk state, walk-support attention, or a
//! softmax mixture over per-meta-path states.

mod attention;
mod candidate;
mod features;
mod gcn;
mod improved;
mod naive;

pub use attention::{
    attention_aggregate, attention_score, attention_weights, giam_forward, multi_head,
    AttentionParams, LEAKY_SLOPE,
};
pub use candidate::{candidate_metapath_state, giam3_forward, restrict_features, CandidateState};
pub use features::{project_features, FeatureBlock, FeatureSet};
pub use gcn::gcn_forward;
pub use improved::{grouped_propagate, improved_forward};
pub use naive::{inter_concatenate, intra_aggregate, naive_forward, GroupMap, GroupedEmbedding};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{AugmentedAdjacency, HinGraph};
use crate::sparse::SparseRowMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Gcn,
    Giam1,
    Giam2,
    Giam,
    Giam3,
}

impl Variant {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "gcn" => Some(Self::Gcn),
            "giam1" => Some(Self::Giam1),
            "giam2" => Some(Self::Giam2),
            "giam" => Some(Self::Giam),
            "giam3" => Some(Self::Giam3),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gcn => "gcn",
            Self::Giam1 => "giam1",
            Self::Giam2 => "giam2",
            Self::Giam => "giam",
            Self::Giam3 => "giam3",
        }
    }

    /// The baseline keeps its rectifier; the layered model uses the smooth
    /// exponential-linear form; the propagation-separated variants run
    /// without activations up to the output softmax.
    pub fn default_activation(self) -> Activation {
        match self {
            Self::Gcn => Activation::Relu,
            Self::Giam1 => Activation::Elu,
            _ => Activation::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Elu,
}

impl Activation {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Self::Identity),
            "relu" => Some(Self::Relu),
            "elu" => Some(Self::Elu),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Relu => "relu",
            Self::Elu => "elu",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Relu => x.max(0.0),
            Self::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp() - 1.0
                }
            }
        }
    }

    /// Derivative at the pre-activation value.
    pub fn grad(self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
        }
    }
}

/// Inverted-dropout configuration threaded through a training forward
/// pass. The draw order is fixed: projected features first, then the
/// attention weights in (group, head, node) order.
pub struct DropoutPlan<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

/// Shape information needed to initialize parameters.
#[derive(Debug, Clone)]
pub struct ModelDims {
    pub raw_dims: Vec<usize>,
    pub hidden: usize,
    pub n_classes: usize,
    pub num_types: usize,
    /// One-hop meta-path group count (layered model only).
    pub num_groups: usize,
    /// Layer count of the layered model.
    pub layers: usize,
    pub heads: usize,
    /// Candidate meta-path count (mixture variant only).
    pub num_paths: usize,
}

/// Every learnable block of one model instance. The same struct carries
/// gradients (see [`ModelParams::zeros_like`]).
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub type_projections: Vec<Array2<f64>>,
    pub layer_weights: Vec<Array2<f64>>,
    pub classifier: Array2<f64>,
    pub attention: Option<AttentionParams>,
    pub metapath_logits: Option<Array1<f64>>,
}

impl ModelParams {
    /// Variance-preserving uniform initialization, `+-sqrt(6/(fan_in +
    /// fan_out))` per matrix; mixture logits start at zero.
    pub fn init(variant: Variant, dims: &ModelDims, rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.hidden == 0 || dims.n_classes == 0 {
            return Err(Error::InvalidArgument(
                "hidden width and class count must be positive".into(),
            ));
        }
        let mut glorot = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.gen::<f64>() * 2.0 * bound - bound)
        };
        let type_projections: Vec<Array2<f64>> = dims
            .raw_dims
            .iter()
            .map(|&raw| glorot(raw, dims.hidden, raw, dims.hidden))
            .collect();

        let h = dims.hidden;
        let attention_dims = || -> Result<(usize, usize)> {
            if dims.heads == 0 || h % dims.heads != 0 {
                return Err(Error::InvalidArgument(format!(
                    "head count {} must divide the hidden width {h}",
                    dims.heads
                )));
            }
            Ok((dims.heads, h / dims.heads))
        };

        let (layer_weights, classifier, attention_params, logits) = match variant {
            Variant::Gcn => (
                vec![glorot(h, h, h, h)],
                glorot(h, dims.n_classes, h, dims.n_classes),
                None,
                None,
            ),
            Variant::Giam1 => {
                if dims.layers == 0 {
                    return Err(Error::InvalidArgument(
                        "the layered model needs at least one layer".into(),
                    ));
                }
                let weights = (0..dims.layers)
                    .map(|_| glorot(dims.num_groups * h, h, dims.num_groups * h, h))
                    .collect();
                (
                    weights,
                    glorot(h, dims.n_classes, h, dims.n_classes),
                    None,
                    None,
                )
            }
            Variant::Giam2 => (
                vec![glorot(dims.num_types * h, h, dims.num_types * h, h)],
                glorot(h, dims.n_classes, h, dims.n_classes),
                None,
                None,
            ),
            Variant::Giam | Variant::Giam3 => {
                let (heads, d_head) = attention_dims()?;
                let proj = glorot(h, d_head, h, d_head);
                let mu = (0..dims.num_types)
                    .map(|_| glorot(heads, 2 * d_head, 2 * d_head, 1))
                    .collect();
                let width = dims.num_types * h;
                let logits = if variant == Variant::Giam3 {
                    if dims.num_paths == 0 {
                        return Err(Error::InvalidArgument(
                            "the mixture variant needs candidate meta-paths".into(),
                        ));
                    }
                    Some(Array1::zeros(dims.num_paths))
                } else {
                    None
                };
                (
                    Vec::new(),
                    glorot(width, dims.n_classes, width, dims.n_classes),
                    Some(AttentionParams { proj, mu }),
                    logits,
                )
            }
        };
        Ok(Self {
            type_projections,
            layer_weights,
            classifier,
            attention: attention_params,
            metapath_logits: logits,
        })
    }

    /// Same shapes, all zeros; the gradient container.
    pub fn zeros_like(&self) -> Self {
        Self {
            type_projections: self
                .type_projections
                .iter()
                .map(|w| Array2::zeros(w.dim()))
                .collect(),
            layer_weights: self
                .layer_weights
                .iter()
                .map(|w| Array2::zeros(w.dim()))
                .collect(),
            classifier: Array2::zeros(self.classifier.dim()),
            attention: self.attention.as_ref().map(|a| AttentionParams {
                proj: Array2::zeros(a.proj.dim()),
                mu: a.mu.iter().map(|m| Array2::zeros(m.dim())).collect(),
            }),
            metapath_logits: self.metapath_logits.as_ref().map(|l| Array1::zeros(l.len())),
        }
    }

    /// Flat views over every block, in a fixed canonical order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for w in &self.type_projections {
            out.push(w.as_slice().expect("standard layout"));
        }
        for w in &self.layer_weights {
            out.push(w.as_slice().expect("standard layout"));
        }
        out.push(self.classifier.as_slice().expect("standard layout"));
        if let Some(att) = &self.attention {
            out.push(att.proj.as_slice().expect("standard layout"));
            for m in &att.mu {
                out.push(m.as_slice().expect("standard layout"));
            }
        }
        if let Some(l) = &self.metapath_logits {
            out.push(l.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for w in &mut self.type_projections {
            out.push(w.as_slice_mut().expect("standard layout"));
        }
        for w in &mut self.layer_weights {
            out.push(w.as_slice_mut().expect("standard layout"));
        }
        out.push(self.classifier.as_slice_mut().expect("standard layout"));
        if let Some(att) = &mut self.attention {
            out.push(att.proj.as_slice_mut().expect("standard layout"));
            for m in &mut att.mu {
                out.push(m.as_slice_mut().expect("standard layout"));
            }
        }
        if let Some(l) = &mut self.metapath_logits {
            out.push(l.as_slice_mut().expect("standard layout"));
        }
        out
    }

    /// Block names aligned with [`ModelParams::slices`].
    pub fn block_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in 0..self.type_projections.len() {
            out.push(format!("projection.{t}"));
        }
        for l in 0..self.layer_weights.len() {
            out.push(format!("layer.{l}"));
        }
        out.push("classifier".into());
        if let Some(att) = &self.attention {
            out.push("attention.proj".into());
            for g in 0..att.mu.len() {
                out.push(format!("attention.mu.{g}"));
            }
        }
        if self.metapath_logits.is_some() {
            out.push("metapath_logits".into());
        }
        out
    }
}

/// The propagation structure a forward pass runs over.
pub enum Carrier<'a> {
    Gcn {
        ahat: &'a SparseRowMatrix,
    },
    Naive {
        aug: &'a AugmentedAdjacency,
        groups: &'a GroupMap,
    },
    Improved {
        state: &'a SparseRowMatrix,
    },
    Attention {
        state: &'a SparseRowMatrix,
    },
    MultiPath {
        states: Vec<&'a SparseRowMatrix>,
    },
}

pub struct ModelContext<'a> {
    pub graph: &'a HinGraph,
    pub features: &'a FeatureSet,
    pub activation: Activation,
    pub carrier: Carrier<'a>,
}

pub struct ForwardCache {
    /// Projected (and, in training, dropped) features.
    x: Array2<f64>,
    x_factor: Option<Array2<f64>>,
    variant: VariantCache,
}

enum VariantCache {
    Gcn(gcn::GcnCache),
    Naive(naive::NaiveCache),
    Improved(improved::ImprovedCache),
    Attention(attention::GiamCache),
    MultiPath {
        caches: Vec<attention::GiamCache>,
        weights: Vec<f64>,
        embeds: Vec<Array2<f64>>,
    },
}

/// Embedding forward pass of any variant. With a [`DropoutPlan`], inverted
/// dropout is applied to the projected features and (for the attention
/// variants) the attention weights.
pub fn forward_embedding(
    params: &ModelParams,
    ctx: &ModelContext<'_>,
    mut dropout: Option<DropoutPlan<'_>>,
) -> Result<(Array2<f64>, ForwardCache)> {
    let x0 = project_features(ctx.features, &params.type_projections, ctx.graph)?;
    let (x, x_factor) = match dropout.as_mut() {
        Some(plan) if plan.rate > 0.0 => {
            let keep = 1.0 - plan.rate;
            let mut factor = Array2::zeros(x0.dim());
            for f in factor.iter_mut() {
                *f = if plan.rng.gen::<f64>() < plan.rate {
                    0.0
                } else {
                    1.0 / keep
                };
            }
            (&x0 * &factor, Some(factor))
        }
        _ => (x0, None),
    };

    let need_weight = |idx: usize| -> Result<&Array2<f64>> {
        params.layer_weights.get(idx).ok_or(Error::ShapeMismatch {
            context: "layer weights".into(),
            expected: format!("at least {} matrices", idx + 1),
            got: format!("{}", params.layer_weights.len()),
        })
    };

    let (h, variant) = match &ctx.carrier {
        Carrier::Gcn { ahat } => {
            let (h, cache) = gcn::gcn_embed_cached(ahat, &x, need_weight(0)?, ctx.activation);
            (h, VariantCache::Gcn(cache))
        }
        Carrier::Naive { aug, groups } => {
            let (h, cache) = naive::naive_forward_cached(
                aug,
                ctx.graph,
                groups,
                &x,
                &params.layer_weights,
                ctx.activation,
            );
            (h, VariantCache::Naive(cache))
        }
        Carrier::Improved { state } => {
            let (h, cache) = improved::improved_forward_cached(
                state,
                &x,
                need_weight(0)?,
                ctx.graph,
                ctx.activation,
            );
            (h, VariantCache::Improved(cache))
        }
        Carrier::Attention { state } => {
            let att = params.attention.as_ref().ok_or(Error::ShapeMismatch {
                context: "attention parameters".into(),
                expected: "present".into(),
                got: "absent".into(),
            })?;
            let (h, cache) = attention::giam_forward_cached(
                state,
                &x,
                att,
                ctx.graph,
                ctx.activation,
                dropout.as_mut(),
            );
            (h, VariantCache::Attention(cache))
        }
        Carrier::MultiPath { states } => {
            let att = params.attention.as_ref().ok_or(Error::ShapeMismatch {
                context: "attention parameters".into(),
                expected: "present".into(),
                got: "absent".into(),
            })?;
            let logits = params.metapath_logits.as_ref().ok_or(Error::ShapeMismatch {
                context: "meta-path logits".into(),
                expected: format!("{} logits", states.len()),
                got: "absent".into(),
            })?;
            if logits.len() != states.len() {
                return Err(Error::ShapeMismatch {
                    context: "meta-path logits".into(),
                    expected: format!("{} logits", states.len()),
                    got: format!("{}", logits.len()),
                });
            }
            let weights = candidate::softmax_logits(logits);
            let mut caches = Vec::with_capacity(states.len());
            let mut embeds = Vec::with_capacity(states.len());
            let mut h = None;
            for (state, &w) in states.iter().zip(&weights) {
                let (h_m, cache) = attention::giam_forward_cached(
                    state,
                    &x,
                    att,
                    ctx.graph,
                    ctx.activation,
                    dropout.as_mut(),
                );
                match &mut h {
                    None => {
                        let mut first = h_m.clone();
                        first *= w;
                        h = Some(first);
                    }
                    Some(acc) => acc.scaled_add(w, &h_m),
                }
                caches.push(cache);
                embeds.push(h_m);
            }
            (
                h.expect("at least one candidate state"),
                VariantCache::MultiPath {
                    caches,
                    weights,
                    embeds,
                },
            )
        }
    };
    Ok((
        h,
        ForwardCache {
            x,
            x_factor,
            variant,
        },
    ))
}

/// Gradients of every embedding-side parameter block given the gradient of
/// the embedding matrix. The classifier gradient is the caller's business.
pub fn backward_embedding(
    params: &ModelParams,
    ctx: &ModelContext<'_>,
    cache: &ForwardCache,
    d_h: &Array2<f64>,
) -> Result<ModelParams> {
    let mut grads = params.zeros_like();
    let d_x = match (&ctx.carrier, &cache.variant) {
        (Carrier::Gcn { ahat }, VariantCache::Gcn(gcache)) => {
            let (d_x, d_w0) = gcn::gcn_embed_backward(
                ahat,
                &params.layer_weights[0],
                ctx.activation,
                gcache,
                d_h,
            );
            grads.layer_weights[0] = d_w0;
            d_x
        }
        (Carrier::Naive { aug, groups }, VariantCache::Naive(ncache)) => {
            let (d_x, d_ws) = naive::naive_backward(
                aug,
                ctx.graph,
                groups,
                &params.layer_weights,
                ctx.activation,
                ncache,
                d_h,
            );
            grads.layer_weights = d_ws;
            d_x
        }
        (Carrier::Improved { state }, VariantCache::Improved(icache)) => {
            let (d_x, d_w) = improved::improved_backward(
                state,
                &params.layer_weights[0],
                ctx.graph,
                ctx.activation,
                icache,
                d_h,
            );
            grads.layer_weights[0] = d_w;
            d_x
        }
        (Carrier::Attention { .. }, VariantCache::Attention(acache)) => {
            let att = params.attention.as_ref().expect("checked in forward");
            let (d_x, d_proj, d_mu) =
                attention::giam_backward(&cache.x, att, ctx.activation, acache, d_h);
            grads.attention = Some(AttentionParams {
                proj: d_proj,
                mu: d_mu,
            });
            d_x
        }
        (
            Carrier::MultiPath { .. },
            VariantCache::MultiPath {
                caches,
                weights,
                embeds,
            },
        ) => {
            let att = params.attention.as_ref().expect("checked in forward");
            let mut d_x_total: Option<Array2<f64>> = None;
            let mut d_proj_total: Option<Array2<f64>> = None;
            let mut d_mu_total: Option<Vec<Array2<f64>>> = None;
            let mut inner: Vec<f64> = Vec::with_capacity(caches.len());
            for ((gcache, &w), h_m) in caches.iter().zip(weights).zip(embeds) {
                inner.push((h_m * d_h).sum());
                let d_h_m = d_h * w;
                let (d_x, d_proj, d_mu) =
                    attention::giam_backward(&cache.x, att, ctx.activation, gcache, &d_h_m);
                match &mut d_x_total {
                    None => d_x_total = Some(d_x),
                    Some(acc) => *acc += &d_x,
                }
                match &mut d_proj_total {
                    None => d_proj_total = Some(d_proj),
                    Some(acc) => *acc += &d_proj,
                }
                match &mut d_mu_total {
                    None => d_mu_total = Some(d_mu),
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&d_mu) {
                            *a += b;
                        }
                    }
                }
            }
            // Softmax mixture gradient for the logits.
            let expectation: f64 = weights.iter().zip(&inner).map(|(w, s)| w * s).sum();
            let d_logits = Array1::from_iter(
                weights
                    .iter()
                    .zip(&inner)
                    .map(|(w, s)| w * (s - expectation)),
            );
            grads.metapath_logits = Some(d_logits);
            grads.attention = Some(AttentionParams {
                proj: d_proj_total.expect("at least one path"),
                mu: d_mu_total.expect("at least one path"),
            });
            d_x_total.expect("at least one path")
        }
        _ => {
            return Err(Error::InvalidArgument(
                "forward cache does not match the carrier".into(),
            ))
        }
    };
    let d_x = match &cache.x_factor {
        Some(factor) => &d_x * factor,
        None => d_x,
    };
    grads.type_projections = features::project_backward(ctx.features, ctx.graph, &d_x);
    Ok(grads)
}

/// Row-wise numerically stable softmax.
pub(crate) fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
