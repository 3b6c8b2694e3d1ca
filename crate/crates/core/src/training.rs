//! Semi-supervised optimization: masked cross-entropy, analytic backward
//! passes, adaptive-moment updates, inverted dropout, early stopping, and
//! a central-difference gradient check.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::{
    backward_embedding, forward_embedding, softmax_rows, DropoutPlan, ModelContext, ModelParams,
};

/// Node labels plus disjoint train/validation/test masks.
#[derive(Debug, Clone)]
pub struct LabeledSplit {
    pub labels: Vec<Option<usize>>,
    pub n_classes: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl LabeledSplit {
    pub fn new(
        labels: Vec<Option<usize>>,
        n_classes: usize,
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let mut seen = vec![false; labels.len()];
        for mask in [&train, &val, &test] {
            for &i in mask {
                if i >= labels.len() {
                    return Err(Error::InvalidArgument(format!(
                        "mask index {i} out of range"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "node {i} appears in more than one mask"
                    )));
                }
                seen[i] = true;
                match labels[i] {
                    Some(y) if y < n_classes => {}
                    Some(y) => {
                        return Err(Error::InvalidArgument(format!(
                            "label {y} of node {i} outside 0..{n_classes}"
                        )))
                    }
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "masked node {i} carries no label"
                        )))
                    }
                }
            }
        }
        Ok(Self {
            labels,
            n_classes,
            train,
            val,
            test,
        })
    }

    /// Stratified split by per-class fractions; every class puts at least
    /// one node in the train mask.
    pub fn stratified_fractions(
        labels: Vec<Option<usize>>,
        n_classes: usize,
        train_frac: f64,
        val_frac: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, label) in labels.iter().enumerate() {
            if let Some(y) = label {
                if *y >= n_classes {
                    return Err(Error::InvalidArgument(format!(
                        "label {y} outside 0..{n_classes}"
                    )));
                }
                by_class[*y].push(i);
            }
        }
        let mut train = Vec::new();
        let mut val = Vec::new();
        let mut test = Vec::new();
        for members in by_class.iter_mut() {
            if members.is_empty() {
                continue;
            }
            members.shuffle(&mut rng);
            let n = members.len();
            let n_train = ((train_frac * n as f64).round() as usize).clamp(1, n);
            let n_val = ((val_frac * n as f64).round() as usize).min(n - n_train);
            train.extend_from_slice(&members[..n_train]);
            val.extend_from_slice(&members[n_train..n_train + n_val]);
            test.extend_from_slice(&members[n_train + n_val..]);
        }
        Self::new(labels, n_classes, train, val, test)
    }

    /// Stratified split by absolute train/validation counts, distributed
    /// proportionally over the classes.
    pub fn stratified_counts(
        labels: Vec<Option<usize>>,
        n_classes: usize,
        train_count: usize,
        val_count: usize,
        seed: u64,
    ) -> Result<Self> {
        let labeled: usize = labels.iter().filter(|l| l.is_some()).count();
        if train_count + val_count > labeled {
            return Err(Error::InvalidArgument(format!(
                "requested {train_count}+{val_count} masked nodes, only {labeled} labeled"
            )));
        }
        let train_frac = train_count as f64 / labeled as f64;
        let val_frac = val_count as f64 / labeled as f64;
        Self::stratified_fractions(labels, n_classes, train_frac, val_frac, seed)
    }

    pub fn one_hot_row(&self, node: usize) -> Option<usize> {
        self.labels[node]
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            dropout_rate: 0.5,
            patience: 50,
            max_epochs: 1000,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub best_epoch: usize,
    /// Parameters at the best validation epoch.
    pub params: ModelParams,
}

/// Masked mean cross-entropy of `softmax(H C)` against the labels.
pub fn cross_entropy(
    classifier: &Array2<f64>,
    h: &Array2<f64>,
    split: &LabeledSplit,
    mask: &[usize],
) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let logits = h.dot(classifier);
    let mut loss = 0.0;
    for &u in mask {
        let y = split.labels[u].expect("masked nodes carry labels");
        loss -= log_softmax_row(&logits, u, y);
    }
    Ok(loss / mask.len() as f64)
}

fn log_softmax_row(logits: &Array2<f64>, row: usize, class: usize) -> f64 {
    let r = logits.row(row);
    let max = r.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let log_sum = r.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
    logits[[row, class]] - log_sum
}

/// Loss and the masked-softmax gradient with respect to the logits.
fn loss_and_dlogits(
    classifier: &Array2<f64>,
    h: &Array2<f64>,
    split: &LabeledSplit,
    mask: &[usize],
) -> Result<(f64, Array2<f64>)> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let logits = h.dot(classifier);
    let probs = softmax_rows(&logits);
    let m = mask.len() as f64;
    let mut d_logits = Array2::<f64>::zeros(logits.dim());
    let mut loss = 0.0;
    for &u in mask {
        let y = split.labels[u].expect("masked nodes carry labels");
        loss -= log_softmax_row(&logits, u, y);
        for c in 0..split.n_classes {
            d_logits[[u, c]] = (probs[[u, c]] - if c == y { 1.0 } else { 0.0 }) / m;
        }
    }
    Ok((loss / m, d_logits))
}

/// Analytic gradients of the masked loss for every parameter block, in
/// evaluation mode (no dropout). Returns the loss alongside.
pub fn backward(
    params: &ModelParams,
    ctx: &ModelContext<'_>,
    split: &LabeledSplit,
    mask: &[usize],
) -> Result<(f64, ModelParams)> {
    let (h, cache) = forward_embedding(params, ctx, None)?;
    let (loss, d_logits) = loss_and_dlogits(&params.classifier, &h, split, mask)?;
    let d_c = h.t().dot(&d_logits);
    let d_h = d_logits.dot(&params.classifier.t());
    let mut grads = backward_embedding(params, ctx, &cache, &d_h)?;
    grads.classifier = d_c;
    Ok((loss, grads))
}

/// Adam moment buffers, aligned with the canonical block order.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: usize,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let shapes: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected adaptive-moment update.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    config: &TrainConfig,
) {
    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - config.beta1.powi(t);
    let bias2 = 1.0 - config.beta2.powi(t);
    let g_slices = grads.slices();
    for (b, p_slice) in params.slices_mut().into_iter().enumerate() {
        let g_slice = g_slices[b];
        let m = &mut state.m[b];
        let v = &mut state.v[b];
        for i in 0..p_slice.len() {
            let g = g_slice[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p_slice[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
}

/// Inverted dropout: surviving entries are scaled by `1/(1-rate)` so the
/// expectation is the input.
pub fn dropout(matrix: &Array2<f64>, rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if rate == 0.0 {
        return matrix.clone();
    }
    let keep = 1.0 - rate;
    let mut out = matrix.clone();
    for v in out.iter_mut() {
        *v = if rng.gen::<f64>() < rate {
            0.0
        } else {
            *v / keep
        };
    }
    out
}

/// Full training loop: dropout-bearing forward, backward, adaptive-moment
/// update, then a deterministic evaluation pass for the early-stopping
/// monitor. Returns the history and the parameters of the best validation
/// epoch.
pub fn train(
    initial: ModelParams,
    ctx: &ModelContext<'_>,
    split: &LabeledSplit,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    if split.train.is_empty() {
        return Err(Error::EmptyMask);
    }
    let monitor: &[usize] = if split.val.is_empty() {
        &split.train
    } else {
        &split.val
    };
    let mut params = initial;
    let mut adam = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_accuracy: Vec::new(),
        best_epoch: 0,
        params: params.clone(),
    };
    let mut best_val = f64::INFINITY;
    let mut bad_epochs = 0usize;

    for epoch in 0..config.max_epochs {
        let plan = DropoutPlan {
            rate: config.dropout_rate,
            rng: &mut rng,
        };
        let (h, cache) = forward_embedding(&params, ctx, Some(plan))?;
        let (train_loss, d_logits) =
            loss_and_dlogits(&params.classifier, &h, split, &split.train)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: train_loss,
            });
        }
        let d_c = h.t().dot(&d_logits);
        let d_h = d_logits.dot(&params.classifier.t());
        let mut grads = backward_embedding(&params, ctx, &cache, &d_h)?;
        grads.classifier = d_c;
        if config.weight_decay > 0.0 {
            let p_slices = params.slices();
            for (b, g_slice) in grads.slices_mut().into_iter().enumerate() {
                for (g, p) in g_slice.iter_mut().zip(p_slices[b]) {
                    *g += config.weight_decay * p;
                }
            }
        }
        adam_step(&mut params, &grads, &mut adam, config);

        let (h_eval, _) = forward_embedding(&params, ctx, None)?;
        let val_loss = cross_entropy(&params.classifier, &h_eval, split, monitor)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: val_loss,
            });
        }
        let val_acc = accuracy(&params.classifier, &h_eval, split, monitor);
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.val_accuracy.push(val_acc);

        if val_loss < best_val {
            best_val = val_loss;
            history.best_epoch = epoch;
            history.params = params.clone();
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= config.patience {
                break;
            }
        }
    }
    Ok(history)
}

/// Argmax accuracy over a mask.
pub fn accuracy(
    classifier: &Array2<f64>,
    h: &Array2<f64>,
    split: &LabeledSplit,
    mask: &[usize],
) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    let logits = h.dot(classifier);
    let mut hit = 0usize;
    for &u in mask {
        let y = split.labels[u].expect("masked nodes carry labels");
        let row = logits.row(u);
        let mut best = 0;
        for c in 1..row.len() {
            if row[c] > row[best] {
                best = c;
            }
        }
        if best == y {
            hit += 1;
        }
    }
    hit as f64 / mask.len() as f64
}

/// Central-difference verification of [`backward`]: every block is probed
/// on all coordinates (or a 200-coordinate subsample for large blocks) and
/// the maximum relative error is returned, with denominator
/// `max(|numeric|, |analytic|, 1e-8)`.
pub fn finite_difference_check(
    params: &mut ModelParams,
    ctx: &ModelContext<'_>,
    split: &LabeledSplit,
    mask: &[usize],
    epsilon: f64,
) -> Result<f64> {
    assert!(
        (1e-7..=1e-4).contains(&epsilon),
        "epsilon outside the sensible central-difference range"
    );
    const SAMPLE_CAP: usize = 200;
    let (_, analytic) = backward(params, ctx, split, mask)?;
    let analytic_slices: Vec<Vec<f64>> =
        analytic.slices().into_iter().map(|s| s.to_vec()).collect();

    let mut max_rel = 0.0f64;
    for (b, block) in analytic_slices.iter().enumerate() {
        let len = block.len();
        let coords: Vec<usize> = if len <= SAMPLE_CAP {
            (0..len).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0xfd00 + b as u64);
            rand::seq::index::sample(&mut rng, len, SAMPLE_CAP).into_vec()
        };
        for &i in &coords {
            let original = params.slices()[b][i];
            params.slices_mut()[b][i] = original + epsilon;
            let loss_plus = eval_loss(params, ctx, split, mask)?;
            params.slices_mut()[b][i] = original - epsilon;
            let loss_minus = eval_loss(params, ctx, split, mask)?;
            params.slices_mut()[b][i] = original;
            let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
            let a = block[i];
            let rel = (numeric - a).abs() / numeric.abs().max(a.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

fn eval_loss(
    params: &ModelParams,
    ctx: &ModelContext<'_>,
    split: &LabeledSplit,
    mask: &[usize],
) -> Result<f64> {
    let (h, _) = forward_embedding(params, ctx, None)?;
    cross_entropy(&params.classifier, &h, split, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeRecord, HinGraph, NodeRecord};
    use crate::models::{
        candidate_metapath_state, restrict_features, Activation, Carrier, FeatureBlock,
        FeatureSet, GroupMap, ModelDims, Variant,
    };
    use crate::propagation::{constrained_walk, NullTransition, TransitionMatrix};
    use ndarray::Array1;

    fn uniform_loss_setup(n_classes: usize) -> (Array2<f64>, Array2<f64>, LabeledSplit) {
        let n = 4;
        let h = Array2::<f64>::zeros((n, 3));
        let c = Array2::<f64>::zeros((3, n_classes));
        let labels = (0..n).map(|i| Some(i % n_classes)).collect();
        let split = LabeledSplit::new(labels, n_classes, vec![0, 1, 2, 3], vec![], vec![]).unwrap();
        (h, c, split)
    }

    #[test]
    fn uniform_logits_give_log_class_count() {
        for n_classes in [3usize, 4] {
            let (h, c, split) = uniform_loss_setup(n_classes);
            let loss = cross_entropy(&c, &h, &split, &split.train.clone()).unwrap();
            assert!((loss - (n_classes as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_correct_prediction_has_near_zero_loss() {
        let n = 3;
        let mut h = Array2::<f64>::zeros((n, 3));
        for i in 0..n {
            h[[i, i]] = 50.0;
        }
        let c = Array2::<f64>::eye(3);
        let labels = (0..n).map(Some).collect();
        let split = LabeledSplit::new(labels, 3, vec![0, 1, 2], vec![], vec![]).unwrap();
        let loss = cross_entropy(&c, &h, &split, &split.train.clone()).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let (h, c, split) = uniform_loss_setup(3);
        assert!(matches!(
            cross_entropy(&c, &h, &split, &[]),
            Err(Error::EmptyMask)
        ));
    }

    /// Small single-type context for the improved-model variant.
    struct Toy {
        graph: HinGraph,
        features: FeatureSet,
        state: crate::propagation::PropagationState,
        split: LabeledSplit,
    }

    fn improved_toy(seed: u64) -> Toy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 10;
        let mut edges = Vec::new();
        for u in 0..n {
            edges.push((u, (u + 1) % n));
            if u % 2 == 0 {
                edges.push((u, (u + 4) % n));
            }
        }
        let edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .filter(|(a, b)| a != b)
            .collect();
        let graph = HinGraph::single_type(n, &edges);
        let feats = Array2::from_shape_fn((n, 4), |_| rng.gen::<f64>() - 0.5);
        let features = FeatureSet::new(vec![FeatureBlock::Dense(feats)], &graph).unwrap();
        let aug = graph.augment();
        let p = TransitionMatrix::new(&aug);
        let q = NullTransition::new(&aug);
        let state = constrained_walk(&p, &q, 2);
        let labels: Vec<Option<usize>> = (0..n).map(|i| Some(i % 2)).collect();
        let split =
            LabeledSplit::new(labels, 2, vec![0, 1, 2, 3, 4, 5], vec![6, 7], vec![8, 9]).unwrap();
        Toy {
            graph,
            features,
            state,
            split,
        }
    }

    #[test]
    fn classifier_gradient_matches_closed_form() {
        let toy = improved_toy(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dims = ModelDims {
            raw_dims: vec![4],
            hidden: 3,
            n_classes: 2,
            num_types: 1,
            num_groups: 1,
            layers: 1,
            heads: 1,
            num_paths: 0,
        };
        let params = ModelParams::init(Variant::Giam2, &dims, &mut rng).unwrap();
        let ctx = ModelContext {
            graph: &toy.graph,
            features: &toy.features,
            activation: Activation::Identity,
            carrier: Carrier::Improved {
                state: &toy.state.matrix,
            },
        };
        let (_, grads) = backward(&params, &ctx, &toy.split, &toy.split.train).unwrap();

        // Closed form: dC = H^T (P - Y) / |mask| on the mask rows.
        let (h, _) = forward_embedding(&params, &ctx, None).unwrap();
        let probs = softmax_rows(&h.dot(&params.classifier));
        let m = toy.split.train.len() as f64;
        let mut expected = Array2::<f64>::zeros(params.classifier.dim());
        for &u in &toy.split.train {
            let y = toy.split.labels[u].unwrap();
            for j in 0..h.ncols() {
                for c in 0..2 {
                    let delta = probs[[u, c]] - if c == y { 1.0 } else { 0.0 };
                    expected[[j, c]] += h[[u, j]] * delta / m;
                }
            }
        }
        let diff = (&grads.classifier - &expected)
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn zero_loss_point_has_zero_gradients() {
        // A perfectly confident correct model sits at a stationary point.
        let toy = improved_toy(3);
        let n = toy.graph.node_count();
        let dims = ModelDims {
            raw_dims: vec![4],
            hidden: 2,
            n_classes: 2,
            num_types: 1,
            num_groups: 1,
            layers: 1,
            heads: 1,
            num_paths: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = ModelParams::init(Variant::Giam2, &dims, &mut rng).unwrap();
        // Identity state, features replaced by the labels themselves.
        let mut feats = Array2::<f64>::zeros((n, 4));
        for i in 0..n {
            feats[[i, i % 2]] = 1.0;
        }
        let features = FeatureSet::new(vec![FeatureBlock::Dense(feats)], &toy.graph).unwrap();
        let identity = crate::propagation::PropagationState::identity(n, true);
        params.type_projections[0] = {
            let mut w = Array2::zeros((4, 2));
            w[[0, 0]] = 1.0;
            w[[1, 1]] = 1.0;
            w
        };
        params.layer_weights[0] = Array2::eye(2) * 60.0;
        params.classifier = Array2::eye(2);
        let ctx = ModelContext {
            graph: &toy.graph,
            features: &features,
            activation: Activation::Identity,
            carrier: Carrier::Improved {
                state: &identity.matrix,
            },
        };
        let (loss, grads) = backward(&params, &ctx, &toy.split, &toy.split.train).unwrap();
        assert!(loss < 1e-12);
        for slice in grads.slices() {
            for &g in slice {
                assert!(g.abs() < 1e-12, "gradient {g}");
            }
        }
    }

    fn scalar_params(value: f64) -> ModelParams {
        ModelParams {
            type_projections: vec![],
            layer_weights: vec![],
            classifier: Array2::from_elem((1, 1), value),
            attention: None,
            metapath_logits: None,
        }
    }

    #[test]
    fn adam_with_zero_gradients_keeps_parameters() {
        let mut params = scalar_params(1.5);
        let grads = scalar_params(0.0);
        let mut state = AdamState::new(&params);
        let config = TrainConfig::default();
        for _ in 0..10 {
            adam_step(&mut params, &grads, &mut state, &config);
        }
        assert_eq!(params.classifier[[0, 0]], 1.5);
    }

    #[test]
    fn adam_first_step_is_learning_rate_times_sign() {
        let config = TrainConfig::default();
        for g in [0.3f64, -2.0] {
            let mut params = scalar_params(0.0);
            let grads = scalar_params(g);
            let mut state = AdamState::new(&params);
            adam_step(&mut params, &grads, &mut state, &config);
            let step = params.classifier[[0, 0]];
            let expected = -config.learning_rate * g.signum();
            assert!((step - expected).abs() < 1e-6, "step {step} vs {expected}");
        }
    }

    #[test]
    fn adam_step_magnitude_approaches_learning_rate() {
        let config = TrainConfig::default();
        let mut params = scalar_params(0.0);
        let grads = scalar_params(0.7);
        let mut state = AdamState::new(&params);
        let mut prev = 0.0;
        let mut last_step = 0.0;
        for _ in 0..1000 {
            adam_step(&mut params, &grads, &mut state, &config);
            last_step = (params.classifier[[0, 0]] - prev).abs();
            prev = params.classifier[[0, 0]];
        }
        assert!(
            (last_step - config.learning_rate).abs() < 0.01 * config.learning_rate,
            "step {last_step}"
        );
    }

    #[test]
    fn dropout_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = Array2::from_elem((4, 4), 1.0);
        let out = dropout(&m, 0.0, &mut rng);
        assert_eq!(out, m);
        let out = dropout(&m, 0.5, &mut rng);
        for &v in out.iter() {
            assert!(v == 0.0 || (v - 2.0).abs() < 1e-15);
        }
        // Monte-Carlo expectation over many draws.
        let mut total = 0.0;
        let draws = 10_000;
        let single = Array2::from_elem((1, 1), 1.0);
        for _ in 0..draws {
            total += dropout(&single, 0.5, &mut rng)[[0, 0]];
        }
        let mean = total / draws as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn training_fits_a_separable_toy() {
        let n = 10;
        let graph = HinGraph::single_type(n, &[(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)]);
        let mut feats = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            feats[[i, i % 2]] = 1.0;
        }
        let features = FeatureSet::new(vec![FeatureBlock::Dense(feats)], &graph).unwrap();
        let identity = crate::propagation::PropagationState::identity(n, true);
        let labels: Vec<Option<usize>> = (0..n).map(|i| Some(i % 2)).collect();
        let split = LabeledSplit::new(labels, 2, (0..n).collect(), vec![], vec![]).unwrap();
        let dims = ModelDims {
            raw_dims: vec![2],
            hidden: 2,
            n_classes: 2,
            num_types: 1,
            num_groups: 1,
            layers: 1,
            heads: 1,
            num_paths: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = ModelParams::init(Variant::Giam2, &dims, &mut rng).unwrap();
        let ctx = ModelContext {
            graph: &graph,
            features: &features,
            activation: Activation::Identity,
            carrier: Carrier::Improved {
                state: &identity.matrix,
            },
        };
        let config = TrainConfig {
            learning_rate: 0.05,
            dropout_rate: 0.0,
            patience: 200,
            max_epochs: 200,
            ..Default::default()
        };
        let history = train(params, &ctx, &split, &config).unwrap();
        let final_loss = *history.train_loss.last().unwrap();
        assert!(final_loss < 0.01, "final loss {final_loss}");
    }

    #[test]
    fn patience_one_stops_after_one_flat_epoch() {
        let toy = improved_toy(8);
        let dims = ModelDims {
            raw_dims: vec![4],
            hidden: 2,
            n_classes: 2,
            num_types: 1,
            num_groups: 1,
            layers: 1,
            heads: 1,
            num_paths: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = ModelParams::init(Variant::Giam2, &dims, &mut rng).unwrap();
        let ctx = ModelContext {
            graph: &toy.graph,
            features: &toy.features,
            activation: Activation::Identity,
            carrier: Carrier::Improved {
                state: &toy.state.matrix,
            },
        };
        // Zero learning rate: the monitor can never strictly improve after
        // the first epoch.
        let config = TrainConfig {
            learning_rate: 0.0,
            dropout_rate: 0.0,
            patience: 1,
            max_epochs: 100,
            ..Default::default()
        };
        let history = train(params, &ctx, &toy.split, &config).unwrap();
        assert_eq!(history.train_loss.len(), 2);
        assert_eq!(history.best_epoch, 0);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let toy = improved_toy(10);
        let dims = ModelDims {
            raw_dims: vec![4],
            hidden: 3,
            n_classes: 2,
            num_types: 1,
            num_groups: 1,
            layers: 1,
            heads: 1,
            num_paths: 0,
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let params = ModelParams::init(Variant::Giam2, &dims, &mut rng).unwrap();
            let ctx = ModelContext {
                graph: &toy.graph,
                features: &toy.features,
                activation: Activation::Identity,
                carrier: Carrier::Improved {
                    state: &toy.state.matrix,
                },
            };
            let config = TrainConfig {
                max_epochs: 30,
                ..Default::default()
            };
            train(params, &ctx, &toy.split, &config).unwrap()
        };
        let h1 = run();
        let h2 = run();
        assert_eq!(h1.train_loss, h2.train_loss);
        assert_eq!(h1.val_loss, h2.val_loss);
        assert_eq!(h1.best_epoch, h2.best_epoch);
        for (a, b) in h1.params.slices().into_iter().zip(h2.params.slices()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn tiny_gradient_step_never_increases_the_loss() {
        for seed in 0..20 {
            let toy = improved_toy(100 + seed);
            let dims = ModelDims {
                raw_dims: vec![4],
                hidden: 3,
                n_classes: 2,
                num_types: 1,
                num_groups: 1,
                layers: 1,
                heads: 1,
                num_paths: 0,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let mut params = ModelParams::init(Variant::Giam2, &dims, &mut rng).unwrap();
            let ctx = ModelContext {
                graph: &toy.graph,
                features: &toy.features,
                activation: Activation::Identity,
                carrier: Carrier::Improved {
                    state: &toy.state.matrix,
                },
            };
            let (loss, grads) = backward(&params, &ctx, &toy.split, &toy.split.train).unwrap();
            let g_slices: Vec<Vec<f64>> = grads.slices().into_iter().map(|s| s.to_vec()).collect();
            for (b, slice) in params.slices_mut().into_iter().enumerate() {
                for (p, g) in slice.iter_mut().zip(&g_slices[b]) {
                    *p -= 1e-6 * g;
                }
            }
            let after = eval_loss(&params, &ctx, &toy.split, &toy.split.train).unwrap();
            assert!(after <= loss + 1e-12, "seed {seed}: {after} > {loss}");
        }
    }

    /// Gradient fidelity for every variant; the heterogeneous toys cover
    /// the grouped paths.
    #[test]
    fn finite_differences_agree_for_every_variant() {
        // Heterogeneous toy: movies/directors/actors.
        let nodes = vec![
            NodeRecord::new("m1", "M"),
            NodeRecord::new("m2", "M"),
            NodeRecord::new("m3", "M"),
            NodeRecord::new("m4", "M"),
            NodeRecord::new("d1", "D"),
            NodeRecord::new("d2", "D"),
            NodeRecord::new("a1", "A"),
            NodeRecord::new("a2", "A"),
        ];
        let edges = vec![
            EdgeRecord::new("m1", "d1"),
            EdgeRecord::new("m2", "d1"),
            EdgeRecord::new("m3", "d2"),
            EdgeRecord::new("m4", "d2"),
            EdgeRecord::new("m1", "a1"),
            EdgeRecord::new("m3", "a1"),
            EdgeRecord::new("m2", "a2"),
            EdgeRecord::new("m4", "a2"),
        ];
        let graph = HinGraph::build(&nodes, &edges).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let raw: Vec<usize> = (0..graph.num_types())
            .map(|t| graph.type_range(t).len())
            .collect();
        let features = FeatureSet::one_hot(&graph);
        let groups = GroupMap::direct(&graph);
        let aug = graph.augment();
        let ahat = aug.normalized();
        let p = TransitionMatrix::new(&aug);
        let q = NullTransition::new(&aug);
        let state = constrained_walk(&p, &q, 2);

        let labels: Vec<Option<usize>> = (0..graph.node_count())
            .map(|u| graph.type_names()[graph.type_of(u)].eq("M").then(|| u % 2))
            .collect();
        let m_nodes: Vec<usize> = (0..graph.node_count())
            .filter(|&u| labels[u].is_some())
            .collect();
        let split = LabeledSplit::new(labels, 2, m_nodes, vec![], vec![]).unwrap();

        let dims = ModelDims {
            raw_dims: raw,
            hidden: 4,
            n_classes: 2,
            num_types: graph.num_types(),
            num_groups: groups.len(),
            layers: 2,
            heads: 2,
            num_paths: 2,
        };

        // Candidate-mode inputs for the mixture variant.
        let mdm = crate::graph::MetaPath::parse("M-D-M", &graph).unwrap();
        let mam = crate::graph::MetaPath::parse("M-A-M", &graph).unwrap();
        let cs1 = candidate_metapath_state(&graph, &[mdm], 2).unwrap();
        let cs2 = candidate_metapath_state(&graph, &[mam], 2).unwrap();
        let derived_features = restrict_features(&features, &graph, &cs1.graph).unwrap();
        let derived_labels: Vec<Option<usize>> =
            (0..cs1.graph.node_count()).map(|u| Some(u % 2)).collect();
        let derived_split = LabeledSplit::new(
            derived_labels,
            2,
            (0..cs1.graph.node_count()).collect(),
            vec![],
            vec![],
        )
        .unwrap();
        let derived_dims = ModelDims {
            raw_dims: vec![cs1.graph.node_count()],
            hidden: 4,
            n_classes: 2,
            num_types: 1,
            num_groups: 1,
            layers: 1,
            heads: 2,
            num_paths: 2,
        };

        let cases: Vec<(&str, Variant, ModelContext<'_>, &LabeledSplit, &ModelDims)> = vec![
            (
                "gcn",
                Variant::Gcn,
                ModelContext {
                    graph: &graph,
                    features: &features,
                    activation: Activation::Relu,
                    carrier: Carrier::Gcn { ahat: &ahat },
                },
                &split,
                &dims,
            ),
            (
                "giam1",
                Variant::Giam1,
                ModelContext {
                    graph: &graph,
                    features: &features,
                    activation: Activation::Elu,
                    carrier: Carrier::Naive {
                        aug: &aug,
                        groups: &groups,
                    },
                },
                &split,
                &dims,
            ),
            (
                "giam2",
                Variant::Giam2,
                ModelContext {
                    graph: &graph,
                    features: &features,
                    activation: Activation::Identity,
                    carrier: Carrier::Improved {
                        state: &state.matrix,
                    },
                },
                &split,
                &dims,
            ),
            (
                "giam",
                Variant::Giam,
                ModelContext {
                    graph: &graph,
                    features: &features,
                    activation: Activation::Identity,
                    carrier: Carrier::Attention {
                        state: &state.matrix,
                    },
                },
                &split,
                &dims,
            ),
            (
                "giam3",
                Variant::Giam3,
                ModelContext {
                    graph: &cs1.graph,
                    features: &derived_features,
                    activation: Activation::Identity,
                    carrier: Carrier::MultiPath {
                        states: vec![&cs1.state.matrix, &cs2.state.matrix],
                    },
                },
                &derived_split,
                &derived_dims,
            ),
        ];

        for (name, variant, ctx, case_split, case_dims) in cases {
            let mut params = ModelParams::init(variant, case_dims, &mut rng).unwrap();
            // Break the softmax shift-invariance plateau on the logits.
            if let Some(logits) = &mut params.metapath_logits {
                *logits = Array1::from_vec(vec![0.3, -0.2]);
            }
            let mask = case_split.train.clone();
            let max_rel =
                finite_difference_check(&mut params, &ctx, case_split, &mask, 1e-5).unwrap();
            assert!(max_rel < 1e-4, "{name}: max relative error {max_rel}");
        }
    }
}
