//! Downstream evaluation of frozen embeddings: linear-probe classification
//! at a ladder of training ratios, k-means clustering, and the agreement
//! metrics NMI, ARI and macro/micro F1.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The training ratios of the probe ladder.
pub const PROBE_RATIOS: [f64; 6] = [0.05, 0.10, 0.20, 0.40, 0.60, 0.80];

#[derive(Debug, Clone)]
pub struct ProbeScores {
    pub ratio: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub macro_f1_std: f64,
    pub micro_f1_std: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub probe: Vec<ProbeScores>,
    pub nmi: f64,
    pub ari: f64,
    pub repeats: usize,
    pub seed: u64,
}

/// Probe + clustering report over the full ratio ladder.
pub fn evaluate_embeddings(
    embeddings: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    repeats: usize,
    seed: u64,
) -> Result<EvalReport> {
    let mut probe = Vec::new();
    for &ratio in &PROBE_RATIOS {
        probe.push(linear_probe(embeddings, labels, n_classes, ratio, repeats, seed)?);
    }
    let clusters = kmeans(embeddings, n_classes.max(2), repeats, seed)?;
    Ok(EvalReport {
        probe,
        nmi: nmi(&clusters, labels),
        ari: ari(&clusters, labels),
        repeats,
        seed,
    })
}

/// Mean macro/micro F1 of an L2-regularized multinomial linear classifier
/// trained on a stratified split at `ratio`, over `repeats` splits.
pub fn linear_probe(
    embeddings: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    ratio: f64,
    repeats: usize,
    seed: u64,
) -> Result<ProbeScores> {
    if embeddings.nrows() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "linear_probe".into(),
            expected: format!("{} label rows", embeddings.nrows()),
            got: format!("{}", labels.len()),
        });
    }
    if !(0.0..1.0).contains(&ratio) || ratio <= 0.0 {
        return Err(Error::InvalidArgument(format!("ratio {ratio} not in (0, 1)")));
    }
    let mut macros = Vec::with_capacity(repeats);
    let mut micros = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let (train, test) = stratified_split(labels, n_classes, ratio, &mut rng)?;
        let (w, b) = fit_softmax_probe(embeddings, labels, &train, n_classes);
        let pred: Vec<usize> = test
            .iter()
            .map(|&i| predict_row(embeddings, i, &w, &b))
            .collect();
        let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        let (ma, mi) = f1_scores(&pred, &truth, n_classes);
        macros.push(ma);
        micros.push(mi);
    }
    Ok(ProbeScores {
        ratio,
        macro_f1: mean(&macros),
        micro_f1: mean(&micros),
        macro_f1_std: std_dev(&macros),
        micro_f1_std: std_dev(&micros),
    })
}

/// Stratified split: per class, a shuffled `ratio` share (at least one
/// point) goes to the train side. Errors if a class would be impossible
/// to represent.
fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    ratio: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {y} outside class set 0..{n_classes}"
            )));
        }
        by_class[y].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in by_class.iter_mut() {
        if members.is_empty() {
            continue;
        }
        members.shuffle(rng);
        let mut take = ((ratio * members.len() as f64).round() as usize).max(1);
        if take >= members.len() && members.len() > 1 {
            take = members.len() - 1;
        }
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::SplitRetriesExhausted {
            retries: 0,
            reason: "split left an empty side".into(),
        });
    }
    Ok((train, test))
}

/// Full-batch gradient descent with backtracking line search on the
/// L2-regularized multinomial logistic objective
/// `mean CE + lambda/(2m) ||W||^2` with `lambda = 1`.
fn fit_softmax_probe(
    x: &Array2<f64>,
    labels: &[usize],
    train: &[usize],
    n_classes: usize,
) -> (Array2<f64>, Array1<f64>) {
    const LAMBDA: f64 = 1.0;
    const TOL: f64 = 1e-6;
    const MAX_ITER: usize = 500;

    let d = x.ncols();
    let m = train.len() as f64;
    let mut w = Array2::<f64>::zeros((d, n_classes));
    let mut b = Array1::<f64>::zeros(n_classes);

    let objective = |w: &Array2<f64>, b: &Array1<f64>| -> f64 {
        let mut loss = 0.0;
        for &i in train {
            let logits: Vec<f64> = (0..n_classes)
                .map(|c| x.row(i).dot(&w.column(c)) + b[c])
                .collect();
            loss += -log_softmax_at(&logits, labels[i]);
        }
        loss / m + LAMBDA / (2.0 * m) * w.iter().map(|v| v * v).sum::<f64>()
    };

    let mut step = 1.0;
    let mut f_curr = objective(&w, &b);
    for _ in 0..MAX_ITER {
        let mut gw = Array2::<f64>::zeros((d, n_classes));
        let mut gb = Array1::<f64>::zeros(n_classes);
        for &i in train {
            let logits: Vec<f64> = (0..n_classes)
                .map(|c| x.row(i).dot(&w.column(c)) + b[c])
                .collect();
            let probs = softmax(&logits);
            for c in 0..n_classes {
                let delta = (probs[c] - if labels[i] == c { 1.0 } else { 0.0 }) / m;
                gb[c] += delta;
                for (gw_dc, x_id) in gw.column_mut(c).iter_mut().zip(x.row(i)) {
                    *gw_dc += delta * x_id;
                }
            }
        }
        gw.scaled_add(LAMBDA / m, &w);

        let grad_norm = gw
            .iter()
            .chain(gb.iter())
            .fold(0.0f64, |acc, g| acc.max(g.abs()));
        if grad_norm < TOL {
            break;
        }
        let grad_sq: f64 =
            gw.iter().map(|g| g * g).sum::<f64>() + gb.iter().map(|g| g * g).sum::<f64>();
        // Backtracking Armijo line search.
        let mut accepted = false;
        for _ in 0..40 {
            let w_try = &w - &(step * &gw);
            let b_try = &b - &(step * &gb);
            let f_try = objective(&w_try, &b_try);
            if f_try <= f_curr - 1e-4 * step * grad_sq {
                w = w_try;
                b = b_try;
                f_curr = f_try;
                accepted = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (w, b)
}

fn predict_row(x: &Array2<f64>, i: usize, w: &Array2<f64>, b: &Array1<f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for c in 0..w.ncols() {
        let score = x.row(i).dot(&w.column(c)) + b[c];
        if score > best_score {
            best_score = score;
            best = c;
        }
    }
    best
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax_at(logits: &[f64], class: usize) -> f64 {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let log_sum = logits
        .iter()
        .map(|&l| (l - max).exp())
        .sum::<f64>()
        .ln()
        + max;
    logits[class] - log_sum
}

/// Lloyd's k-means with probabilistic farthest-point seeding, best inertia
/// over `restarts` independently seeded runs.
pub fn kmeans(
    points: &Array2<f64>,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = points.nrows();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::DegenerateClustering { k, distinct: n });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
        let (labels, inertia) = kmeans_once(points, k, &mut rng);
        if best.as_ref().map_or(true, |(bi, _)| inertia < *bi) {
            best = Some((inertia, labels));
        }
    }
    Ok(best.unwrap().1)
}

fn kmeans_once(points: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    const MAX_ITER: usize = 300;
    const TOL: f64 = 1e-6;
    let n = points.nrows();
    let d = points.ncols();

    // Probabilistic farthest-point seeding: next center drawn with
    // probability proportional to squared distance to the closest center.
    let mut centers = Array2::<f64>::zeros((k, d));
    let first = rand::Rng::gen_range(rng, 0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut min_d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(points, i, &centers, 0))
        .collect();
    for c in 1..k {
        let total: f64 = min_d2.iter().sum();
        let pick = if total <= 0.0 {
            rand::Rng::gen_range(rng, 0..n)
        } else {
            let mut target = rand::Rng::gen::<f64>(rng) * total;
            let mut chosen = n - 1;
            for (i, &w) in min_d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centers.row_mut(c).assign(&points.row(pick));
        for i in 0..n {
            min_d2[i] = min_d2[i].min(squared_distance(points, i, &centers, c));
        }
    }

    let mut labels = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..MAX_ITER {
        // Assign.
        inertia = 0.0;
        for i in 0..n {
            let mut best_c = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dist = squared_distance(points, i, &centers, c);
                if dist < best_d {
                    best_d = dist;
                    best_c = c;
                }
            }
            labels[i] = best_c;
            inertia += best_d;
        }
        // Update.
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            sums.row_mut(labels[i]).scaled_add(1.0, &points.row(i));
        }
        let mut movement = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its
                // current center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = squared_distance(points, a, &centers, labels[a]);
                        let db = squared_distance(points, b, &centers, labels[b]);
                        da.total_cmp(&db)
                    })
                    .unwrap();
                movement = f64::INFINITY;
                centers.row_mut(c).assign(&points.row(far));
                continue;
            }
            let mut shift = 0.0;
            for j in 0..d {
                let new = sums[[c, j]] / counts[c] as f64;
                shift += (new - centers[[c, j]]).powi(2);
                centers[[c, j]] = new;
            }
            movement = movement.max(shift.sqrt());
        }
        if movement < TOL {
            break;
        }
    }
    (labels, inertia)
}

fn squared_distance(points: &Array2<f64>, i: usize, centers: &Array2<f64>, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centers.row(c))
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization.
/// Zero when either partition has a single block.
pub fn nmi(pred: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let n = pred.len() as f64;
    if pred.is_empty() {
        return 0.0;
    }
    let contingency = contingency_table(pred, truth);
    let (rows, cols) = (contingency.nrows(), contingency.ncols());
    let a: Vec<f64> = (0..rows).map(|i| contingency.row(i).sum()).collect();
    let b: Vec<f64> = (0..cols).map(|j| contingency.column(j).sum()).collect();
    let h_pred = entropy(&a, n);
    let h_true = entropy(&b, n);
    if h_pred == 0.0 || h_true == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let nij = contingency[[i, j]];
            if nij > 0.0 {
                mi += nij / n * ((n * nij) / (a[i] * b[j])).ln();
            }
        }
    }
    mi / (0.5 * (h_pred + h_true))
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * (c / n).ln())
        .sum()
}

/// Adjusted Rand index: pair-counting agreement corrected by the
/// hypergeometric chance expectation.
pub fn ari(pred: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let n = pred.len() as f64;
    if pred.len() < 2 {
        return 1.0;
    }
    let contingency = contingency_table(pred, truth);
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let sum_ij: f64 = contingency.iter().map(|&x| choose2(x)).sum();
    let sum_a: f64 = (0..contingency.nrows())
        .map(|i| choose2(contingency.row(i).sum()))
        .sum();
    let sum_b: f64 = (0..contingency.ncols())
        .map(|j| choose2(contingency.column(j).sum()))
        .sum();
    let expected = sum_a * sum_b / choose2(n);
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_ij - expected) / (max_index - expected)
}

fn contingency_table(pred: &[usize], truth: &[usize]) -> Array2<f64> {
    let rows = pred.iter().max().map_or(0, |&m| m + 1);
    let cols = truth.iter().max().map_or(0, |&m| m + 1);
    let mut table = Array2::<f64>::zeros((rows.max(1), cols.max(1)));
    for (&p, &t) in pred.iter().zip(truth) {
        table[[p, t]] += 1.0;
    }
    table
}

/// Macro F1 (unweighted class mean, every class of the declared set
/// counted) and micro F1 (pooled counts).
pub fn f1_scores(pred: &[usize], truth: &[usize], n_classes: usize) -> (f64, f64) {
    assert_eq!(pred.len(), truth.len());
    let mut tp = vec![0.0f64; n_classes];
    let mut fp = vec![0.0f64; n_classes];
    let mut fn_ = vec![0.0f64; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1.0;
        } else {
            fp[p] += 1.0;
            fn_[t] += 1.0;
        }
    }
    let f1 = |tp: f64, fp: f64, fn_: f64| {
        let denom = 2.0 * tp + fp + fn_;
        if denom == 0.0 {
            0.0
        } else {
            2.0 * tp / denom
        }
    };
    let macro_f1 = (0..n_classes)
        .map(|c| f1(tp[c], fp[c], fn_[c]))
        .sum::<f64>()
        / n_classes as f64;
    let micro_f1 = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    (macro_f1, micro_f1)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn one_hot_embeddings_probe_perfectly() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let mut emb = Array2::<f64>::zeros((60, 3));
        for (i, &y) in labels.iter().enumerate() {
            emb[[i, y]] = 1.0;
        }
        for ratio in [0.05, 0.2, 0.8] {
            let scores = linear_probe(&emb, &labels, 3, ratio, 5, 1).unwrap();
            assert!((scores.macro_f1 - 1.0).abs() < 1e-12, "ratio {ratio}");
            assert!((scores.micro_f1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_embeddings_probe_at_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 300;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let emb = Array2::from_shape_fn((n, 8), |_| rng.gen::<f64>());
        let scores = linear_probe(&emb, &labels, 3, 0.4, 10, 3).unwrap();
        assert!(
            (scores.micro_f1 - 1.0 / 3.0).abs() < 0.05,
            "micro {}",
            scores.micro_f1
        );
    }

    #[test]
    fn probe_is_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 90;
        let d = 6;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let mut emb = Array2::from_shape_fn((n, d), |_| rng.gen::<f64>() - 0.5);
        for (i, &y) in labels.iter().enumerate() {
            emb[[i, y]] += 1.0;
        }
        // Random rotation as a product of Givens rotations.
        let mut rotation = Array2::<f64>::eye(d);
        for _ in 0..30 {
            let i = rng.gen_range(0..d);
            let mut j = rng.gen_range(0..d);
            if i == j {
                j = (j + 1) % d;
            }
            let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let (s, c) = theta.sin_cos();
            let mut g = Array2::<f64>::eye(d);
            g[[i, i]] = c;
            g[[j, j]] = c;
            g[[i, j]] = -s;
            g[[j, i]] = s;
            rotation = rotation.dot(&g);
        }
        let rotated = emb.dot(&rotation);
        let base = linear_probe(&emb, &labels, 3, 0.4, 5, 7).unwrap();
        let rot = linear_probe(&rotated, &labels, 3, 0.4, 5, 7).unwrap();
        assert!(
            (base.macro_f1 - rot.macro_f1).abs() < 0.005,
            "{} vs {}",
            base.macro_f1,
            rot.macro_f1
        );
        assert!((base.micro_f1 - rot.micro_f1).abs() < 0.005);
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n_per = 40;
        let mut points = Array2::<f64>::zeros((2 * n_per, 2));
        let mut truth = Vec::new();
        for i in 0..2 * n_per {
            let blob = i / n_per;
            truth.push(blob);
            let center = if blob == 0 { -10.0 } else { 10.0 };
            points[[i, 0]] = center + rng.gen::<f64>();
            points[[i, 1]] = center + rng.gen::<f64>();
        }
        let labels = kmeans(&points, 2, 10, 1).unwrap();
        assert!((nmi(&labels, &truth) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kmeans_on_identical_points_gives_constant_labels() {
        let points = Array2::<f64>::ones((10, 3));
        let labels = kmeans(&points, 2, 3, 1).unwrap();
        assert!(labels.iter().all(|&l| l == labels[0]));
    }

    #[test]
    fn kmeans_with_k_equal_n_has_zero_inertia() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let points = Array2::from_shape_fn((8, 2), |_| rng.gen::<f64>());
        let labels = kmeans(&points, 8, 5, 2).unwrap();
        let mut seen = labels.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn kmeans_rejects_k_larger_than_n() {
        let points = Array2::<f64>::zeros((3, 2));
        assert!(matches!(
            kmeans(&points, 4, 1, 0),
            Err(Error::DegenerateClustering { .. })
        ));
    }

    #[test]
    fn kmeans_inertia_non_increasing_in_restarts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let points = Array2::from_shape_fn((50, 4), |_| rng.gen::<f64>());
        let inertia_of = |restarts: usize| {
            let labels = kmeans(&points, 5, restarts, 3).unwrap();
            let mut centers = Array2::<f64>::zeros((5, 4));
            let mut counts = [0usize; 5];
            for (i, &l) in labels.iter().enumerate() {
                counts[l] += 1;
                centers.row_mut(l).scaled_add(1.0, &points.row(i));
            }
            for c in 0..5 {
                if counts[c] > 0 {
                    centers.row_mut(c).mapv_inplace(|x| x / counts[c] as f64);
                }
            }
            labels
                .iter()
                .enumerate()
                .map(|(i, &l)| squared_distance(&points, i, &centers, l))
                .sum::<f64>()
        };
        let mut prev = f64::INFINITY;
        for restarts in [1, 3, 6, 10] {
            let inertia = inertia_of(restarts);
            assert!(inertia <= prev + 1e-9, "restarts {restarts}: {inertia} > {prev}");
            prev = inertia;
        }
    }

    #[test]
    fn nmi_examples() {
        assert!((nmi(&[0, 0, 1, 1], &[0, 0, 1, 1]) - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 1, 2, 3]), 0.0);
        assert!((nmi(&[0, 0, 1, 1], &[1, 1, 0, 0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ari_examples() {
        assert!((ari(&[0, 1, 0, 2], &[0, 1, 0, 2]) - 1.0).abs() < 1e-12);
        assert!((ari(&[0, 1, 0, 1], &[0, 0, 1, 1]) - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn ari_of_random_predictions_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let truth: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let mut total = 0.0;
        let draws = 1000;
        for _ in 0..draws {
            let pred: Vec<usize> = (0..60).map(|_| rng.gen_range(0..3)).collect();
            total += ari(&pred, &truth);
        }
        let mean = total / draws as f64;
        assert!(mean.abs() < 0.02, "mean ARI {mean}");
    }

    #[test]
    fn relabeling_leaves_metrics_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth: Vec<usize> = (0..40).map(|_| rng.gen_range(0..4)).collect();
        let pred: Vec<usize> = (0..40).map(|_| rng.gen_range(0..4)).collect();
        let relabeled: Vec<usize> = pred.iter().map(|&p| (p + 2) % 4).collect();
        assert!((nmi(&pred, &truth) - nmi(&relabeled, &truth)).abs() < 1e-12);
        assert!((ari(&pred, &truth) - ari(&relabeled, &truth)).abs() < 1e-12);
    }

    #[test]
    fn f1_examples() {
        let pred = vec![0, 0, 0, 0];
        let truth = vec![0, 0, 1, 1];
        let (macro_f1, micro_f1) = f1_scores(&pred, &truth, 2);
        assert!((micro_f1 - 0.5).abs() < 1e-12);
        assert!((macro_f1 - (2.0 / 3.0) / 2.0).abs() < 1e-12);
        let (ma, mi) = f1_scores(&[0, 1, 2], &[0, 1, 2], 3);
        assert_eq!((ma, mi), (1.0, 1.0));
    }

    #[test]
    fn micro_f1_equals_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let n = rng.gen_range(5..50);
            let k = rng.gen_range(2..6);
            let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let (_, micro) = f1_scores(&pred, &truth, k);
            let acc = pred
                .iter()
                .zip(&truth)
                .filter(|(p, t)| p == t)
                .count() as f64
                / n as f64;
            assert!((micro - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn ari_matches_exhaustive_pair_counting() {
        // Brute-force oracle over all pairs, all partitions of <= 6 points.
        fn rand_index_oracle(pred: &[usize], truth: &[usize]) -> f64 {
            let n = pred.len();
            let mut total = 0.0f64;
            let mut same_both = 0.0;
            let mut same_pred = 0.0;
            let mut same_truth = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    total += 1.0;
                    let sp = pred[i] == pred[j];
                    let st = truth[i] == truth[j];
                    if sp && st {
                        same_both += 1.0;
                    }
                    if sp {
                        same_pred += 1.0;
                    }
                    if st {
                        same_truth += 1.0;
                    }
                }
            }
            let expected = same_pred * same_truth / total;
            let max_index = 0.5 * (same_pred + same_truth);
            if (max_index - expected).abs() < 1e-12 {
                return 1.0;
            }
            (same_both - expected) / (max_index - expected)
        }

        fn partitions(n: usize) -> Vec<Vec<usize>> {
            // Restricted growth strings.
            let mut out = Vec::new();
            let mut current = vec![0usize; n];
            fn rec(i: usize, max_used: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if i == current.len() {
                    out.push(current.clone());
                    return;
                }
                for c in 0..=max_used + 1 {
                    current[i] = c;
                    rec(i + 1, max_used.max(c), current, out);
                }
            }
            if n > 0 {
                rec(1, 0, &mut current, &mut out);
            }
            out
        }

        for n in 2..=6 {
            let parts = partitions(n);
            for p in &parts {
                for t in &parts {
                    let ours = ari(p, t);
                    let oracle = rand_index_oracle(p, t);
                    assert!(
                        (ours - oracle).abs() < 1e-12,
                        "n={n} p={p:?} t={t:?}: {ours} vs {oracle}"
                    );
                }
            }
        }
    }
}
