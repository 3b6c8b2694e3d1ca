//! Spectrum of the Markov generator and local mixing windows.
//!
//! The generator `M = I - P` is similar to the symmetric matrix
//! `I - D^-1/2 (A + I) D^-1/2`, so its eigenvalues are computed there.
//! The reciprocals of the small eigenvalues bracket the number of
//! propagation steps at which a c-category structure is clearest: the
//! c-th local mixing state is entered at `1/lambda_{c+1}` and exited at
//! `1/lambda_c`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::AugmentedAdjacency;
use crate::linalg;
use crate::propagation::TransitionMatrix;
use crate::sparse::SparseRowMatrix;

/// Largest n for which the full dense symmetric eigensolve is used; above
/// it only the bottom of the spectrum is computed iteratively.
pub const DENSE_EIGEN_LIMIT: usize = 5000;

/// Eigenvalues below this are treated as exact zeros (unbounded mixing
/// times).
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

/// Ascending smallest eigenvalues of the Markov generator.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    /// Dense up to [`DENSE_EIGEN_LIMIT`], iterative above.
    Auto,
    Dense,
    Iterative,
}

/// Entering and exiting times of the c-th local mixing state.
/// `f64::INFINITY` stands for an unbounded time (eigenvalue at zero).
#[derive(Debug, Clone, Copy)]
pub struct MixingWindow {
    pub c: usize,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Smallest `c_max` eigenvalues of `M = I - P`, ascending.
pub fn markov_spectrum(
    p: &TransitionMatrix,
    aug: &AugmentedAdjacency,
    c_max: usize,
) -> Result<SpectrumResult> {
    markov_spectrum_with(p, aug, c_max, SpectrumMethod::Auto)
}

pub fn markov_spectrum_with(
    p: &TransitionMatrix,
    aug: &AugmentedAdjacency,
    c_max: usize,
    method: SpectrumMethod,
) -> Result<SpectrumResult> {
    let n = p.n();
    if c_max < 1 || c_max > n {
        return Err(Error::InvalidArgument(format!(
            "c_max must lie in 1..={n}, got {c_max}"
        )));
    }
    let lsym = symmetric_generator(p, aug);
    let dense = match method {
        SpectrumMethod::Dense => true,
        SpectrumMethod::Iterative => false,
        SpectrumMethod::Auto => n <= DENSE_EIGEN_LIMIT,
    };
    let eigenvalues = if dense {
        let mut full = linalg::symmetric_eigenvalues(lsym.to_dense())?;
        full.truncate(c_max);
        full
    } else {
        let apply = |x: &[f64], y: &mut [f64]| {
            for (u, out) in y.iter_mut().enumerate() {
                *out = lsym.iter_row(u).map(|(v, val)| val * x[v]).sum();
            }
        };
        let want = (c_max + 1).min(n);
        let max_dim = n.min((6 * want).max(200));
        let mut vals = linalg::lanczos_smallest(apply, n, want, 1e-8, max_dim)?;
        vals.truncate(c_max);
        vals
    };
    Ok(SpectrumResult { eigenvalues })
}

/// The symmetric matrix `I - D^1/2 P D^-1/2`, sharing the spectrum of
/// `I - P` by similarity.
fn symmetric_generator(p: &TransitionMatrix, aug: &AugmentedAdjacency) -> SparseRowMatrix {
    let n = p.n();
    let rows = (0..n)
        .map(|u| {
            p.matrix
                .iter_row(u)
                .map(|(v, p_uv)| {
                    let sym = p_uv * (aug.degrees[u] / aug.degrees[v]).sqrt();
                    let val = if u == v { 1.0 - sym } else { -sym };
                    (v, val)
                })
                .collect()
        })
        .collect();
    SparseRowMatrix::from_rows(n, n, rows)
}

/// Mixing window for the c-th local mixing state: exit at `1/lambda_c`,
/// entry at `1/lambda_{c+1}`.
pub fn mixing_window(spectrum: &SpectrumResult, c: usize) -> Result<MixingWindow> {
    if c < 2 {
        return Err(Error::InvalidArgument(format!(
            "the window is defined for c >= 2 (state 1 never exits), got {c}"
        )));
    }
    if c + 1 > spectrum.len() {
        return Err(Error::WindowOutOfRange {
            c,
            needed: c + 1,
            available: spectrum.len(),
        });
    }
    Ok(MixingWindow {
        c,
        t_enter: reciprocal_time(spectrum.eigenvalues[c]),
        t_exit: reciprocal_time(spectrum.eigenvalues[c - 1]),
    })
}

/// `1/lambda`, unbounded below the zero tolerance.
pub fn reciprocal_time(lambda: f64) -> f64 {
    if lambda < ZERO_EIGENVALUE_TOL {
        f64::INFINITY
    } else {
        1.0 / lambda
    }
}

#[allow(dead_code)]
fn dense_generator(p: &TransitionMatrix) -> Array2<f64> {
    let n = p.n();
    let mut m = Array2::eye(n);
    for (u, v, val) in p.matrix.iter() {
        m[[u, v]] -= val;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::HinGraph;
    use crate::propagation::NullTransition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn connected_graph_has_a_zero_bottom_eigenvalue() {
        let g = HinGraph::single_type(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let aug = g.augment();
        let p = TransitionMatrix::new(&aug);
        let spec = markov_spectrum(&p, &aug, 5).unwrap();
        assert!(spec.eigenvalues[0].abs() <= 1e-8);
        for w in spec.eigenvalues.windows(2) {
            assert!(w[0] <= w[1] + 1e-12);
        }
        for &l in &spec.eigenvalues {
            assert!(l >= -1e-8 && l <= 2.0 + 1e-8);
        }
    }

    #[test]
    fn component_count_equals_zero_multiplicity() {
        // Two disjoint self-looped edges.
        let g = HinGraph::single_type(4, &[(0, 1), (2, 3)]);
        let aug = g.augment();
        let p = TransitionMatrix::new(&aug);
        let spec = markov_spectrum(&p, &aug, 4).unwrap();
        assert!(spec.eigenvalues[0].abs() <= 1e-8);
        assert!(spec.eigenvalues[1].abs() <= 1e-8);
        assert!(spec.eigenvalues[2] > 1e-6);
    }

    #[test]
    fn window_from_direct_reciprocals() {
        let spec = SpectrumResult {
            eigenvalues: vec![0.0, 0.5, 1.0],
        };
        let w = mixing_window(&spec, 2).unwrap();
        assert_eq!(w.t_enter, 1.0);
        assert_eq!(w.t_exit, 2.0);
    }

    #[test]
    fn disconnected_graph_window_is_unbounded() {
        let g = HinGraph::single_type(4, &[(0, 1), (2, 3)]);
        let aug = g.augment();
        let p = TransitionMatrix::new(&aug);
        let spec = markov_spectrum(&p, &aug, 4).unwrap();
        let w = mixing_window(&spec, 2).unwrap();
        assert!(w.t_exit.is_infinite());
        assert!(w.t_enter.is_finite());
        assert!(w.t_enter <= w.t_exit);
    }

    #[test]
    fn window_range_errors() {
        let spec = SpectrumResult {
            eigenvalues: vec![0.0, 0.5, 1.0],
        };
        assert!(mixing_window(&spec, 1).is_err());
        assert!(mixing_window(&spec, 3).is_err());
    }

    #[test]
    fn symmetric_similarity_matches_nonsymmetric_generator() {
        // Oracle: dense nonsymmetric eigensolve of M = I - P.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [8usize, 20, 40] {
            let mut edges = Vec::new();
            for u in 0..n {
                edges.push((u, (u + 1) % n));
                for v in (u + 1)..n {
                    if rng.gen::<f64>() < 0.15 {
                        edges.push((u, v));
                    }
                }
            }
            let aug = HinGraph::single_type(n, &edges).augment();
            let p = TransitionMatrix::new(&aug);
            let spec = markov_spectrum(&p, &aug, n).unwrap();

            let m = dense_generator(&p);
            let na = nalgebra::DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
            let mut reference: Vec<f64> = na
                .complex_eigenvalues()
                .iter()
                .map(|c| {
                    assert!(c.im.abs() < 1e-9, "generator spectrum must be real");
                    c.re
                })
                .collect();
            reference.sort_by(f64::total_cmp);
            for (ours, theirs) in spec.eigenvalues.iter().zip(&reference) {
                assert!((ours - theirs).abs() < 1e-8, "n={n}: {ours} vs {theirs}");
            }
        }
    }

    #[test]
    fn iterative_path_matches_dense_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 300;
        let mut edges = Vec::new();
        for u in 0..n {
            edges.push((u, (u + 1) % n));
            for _ in 0..3 {
                let v = rng.gen_range(0..n);
                if v != u {
                    edges.push((u.min(v), u.max(v)));
                }
            }
        }
        let aug = HinGraph::single_type(n, &edges).augment();
        let p = TransitionMatrix::new(&aug);
        let dense = markov_spectrum_with(&p, &aug, 6, SpectrumMethod::Dense).unwrap();
        let iterative = markov_spectrum_with(&p, &aug, 6, SpectrumMethod::Iterative).unwrap();
        for (a, b) in dense.eigenvalues.iter().zip(&iterative.eigenvalues) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn newman_spectrum_has_a_gap_after_lambda4() {
        let mut ratios = Vec::new();
        for seed in 0..20 {
            let spec_cfg = crate::synthetic::NewmanSpec {
                seed,
                ..Default::default()
            };
            let (graph, _) = crate::synthetic::newman_graph(&spec_cfg).unwrap();
            let aug = graph.augment();
            let p = TransitionMatrix::new(&aug);
            let _ = NullTransition::new(&aug);
            let spec = markov_spectrum(&p, &aug, 6).unwrap();
            ratios.push(spec.eigenvalues[4] / spec.eigenvalues[3]);
        }
        ratios.sort_by(f64::total_cmp);
        let median = ratios[ratios.len() / 2];
        assert!(median >= 2.0, "median gap ratio {median}");
    }
}
