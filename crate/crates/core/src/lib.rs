//! Heterogeneous-graph embedding via random-graph-constrained Markov
//! propagation and type-discriminative aggregation.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! - [`graph`]: typed graph ingestion, self-loop augmentation, meta-path
//!   adjacencies and the sparse row-matrix kernels everything else runs on.
//! - [`propagation`]: the Markov transition matrix, the unconstrained
//!   k-step walk, the degree-preserving null model, and the constrained
//!   walk that clips any transition no better than chance.
//! - [`spectrum`]: eigenvalues of the Markov generator and the mixing
//!   windows that bracket the useful propagation depth.
//! - [`models`]: forward passes of the model ladder (two-layer GCN,
//!   layered aggregation, precomputed-propagation aggregation, node-level
//!   attention, and the meta-path-level attention diagnostic).
//! - [`training`]: cross-entropy objective, hand-written backward passes,
//!   adaptive-moment updates, dropout, early stopping and a finite
//!   difference gradient check.
//! - [`evaluation`]: linear probe classification, k-means, NMI/ARI and F1.
//! - [`synthetic`]: benchmark generators and propagation diagnostics.

pub mod error;
pub mod evaluation;
pub mod graph;
pub mod linalg;
pub mod models;
pub mod propagation;
pub mod sparse;
pub mod spectrum;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use graph::{AugmentedAdjacency, HinGraph, MetaPath};
pub use sparse::SparseRowMatrix;
