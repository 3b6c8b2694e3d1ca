//! Markov propagation over the augmented adjacency.
//!
//! Two walks are offered. The unconstrained walk iterates the transition
//! matrix `P = D^-1 (A + I)`. The constrained walk subtracts, at every
//! step, the transition probability of the degree-preserving random graph
//! (the modularity null model), clips at zero and renormalizes: any
//! transition that is no better than chance is dropped. Because the walk
//! state is row-stochastic, the null-model term reduces to a rank-1
//! broadcast of the row `q_v = d_v / sum(d)`, so the null matrix is never
//! materialized.

use crate::graph::AugmentedAdjacency;
use crate::sparse::SparseRowMatrix;

/// Row-stochastic one-step transition matrix `p_uv = a_uv / d_u`.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub matrix: SparseRowMatrix,
}

impl TransitionMatrix {
    pub fn new(aug: &AugmentedAdjacency) -> Self {
        let n = aug.n();
        let rows = (0..n)
            .map(|u| {
                aug.matrix
                    .iter_row(u)
                    .map(|(v, a)| (v, a / aug.degrees[u]))
                    .collect()
            })
            .collect();
        Self {
            matrix: SparseRowMatrix::from_rows(n, n, rows),
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }
}

/// Rank-1 transition matrix of the degree-preserving random graph.
///
/// On that graph the expected link weight between u and v is
/// `d_u d_v / sum(d)`, so the one-step transition probability collapses to
/// `q_uv = d_v / sum(d)`, identical across source rows. Only the degree
/// vector and its total are kept.
#[derive(Debug, Clone)]
pub struct NullTransition {
    degrees: Vec<f64>,
    total_degree: f64,
}

impl NullTransition {
    pub fn new(aug: &AugmentedAdjacency) -> Self {
        Self {
            degrees: aug.degrees.clone(),
            total_degree: aug.total_degree,
        }
    }

    /// `q_v`, independent of the source row.
    pub fn prob(&self, v: usize) -> f64 {
        self.degrees[v] / self.total_degree
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }
}

/// A k-step walk state `Z^(k)` or `S^(k)`.
#[derive(Debug, Clone)]
pub struct PropagationState {
    pub matrix: SparseRowMatrix,
    pub step: usize,
    pub constrained: bool,
}

impl PropagationState {
    pub fn identity(n: usize, constrained: bool) -> Self {
        Self {
            matrix: SparseRowMatrix::identity(n),
            step: 0,
            constrained,
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }
}

/// `Z^(k) = P^k`, with `Z^(0) = I`.
pub fn unconstrained_walk(p: &TransitionMatrix, k: usize) -> PropagationState {
    let mut state = PropagationState::identity(p.n(), false);
    for _ in 0..k {
        state = unconstrained_step(&state, p);
    }
    state
}

/// One unconstrained step `Z <- Z P`.
pub fn unconstrained_step(s: &PropagationState, p: &TransitionMatrix) -> PropagationState {
    let matrix = s
        .matrix
        .multiply(&p.matrix)
        .expect("walk state and transition matrix share the node set");
    PropagationState {
        matrix,
        step: s.step + 1,
        constrained: false,
    }
}

/// One constrained step: propagate, subtract the null-model row, clip at
/// zero and renormalize. A row whose entries all clip to zero is replaced
/// by the self-indicator row: the node's propagation is nowhere better
/// than chance, so the walk stays put.
pub fn constrained_step(
    s: &PropagationState,
    p: &TransitionMatrix,
    q: &NullTransition,
) -> PropagationState {
    let propagated = s
        .matrix
        .multiply(&p.matrix)
        .expect("walk state and transition matrix share the node set");
    let n = propagated.n_rows();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for u in 0..n {
        let mut row: Vec<(usize, f64)> = propagated
            .iter_row(u)
            .filter_map(|(v, t)| {
                let clipped = t - q.prob(v);
                (clipped > 0.0).then_some((v, clipped))
            })
            .collect();
        let sum: f64 = row.iter().map(|&(_, v)| v).sum();
        if sum > 0.0 {
            for entry in &mut row {
                entry.1 /= sum;
            }
        } else {
            row = vec![(u, 1.0)];
        }
        rows.push(row);
    }
    PropagationState {
        matrix: SparseRowMatrix::from_rows(n, n, rows),
        step: s.step + 1,
        constrained: true,
    }
}

/// `k` constrained steps from `S^(0) = I`.
pub fn constrained_walk(p: &TransitionMatrix, q: &NullTransition, k: usize) -> PropagationState {
    assert!(k >= 1, "the constrained walk needs at least one step");
    let mut state = PropagationState::identity(p.n(), true);
    for _ in 0..k {
        state = constrained_step(&state, p, q);
    }
    state
}
