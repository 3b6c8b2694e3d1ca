use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(String),

    #[error("edge ({src}, {dst}) refers to undeclared node `{missing}`")]
    UnknownEndpoint {
        src: String,
        dst: String,
        missing: String,
    },

    #[error("node type `{0}` does not occur in the graph")]
    UnknownNodeType(String),

    #[error("invalid meta-path `{label}`: {reason}")]
    InvalidMetaPath { label: String, reason: String },

    #[error("dimension mismatch: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("mixing window for c = {c} needs eigenvalues 1..={needed}, spectrum holds {available}")]
    WindowOutOfRange {
        c: usize,
        needed: usize,
        available: usize,
    },

    #[error("label mask is empty")]
    EmptyMask,

    #[error("attention neighborhood is empty; route the node to the unattended path")]
    EmptyNeighborhood,

    #[error("non-finite loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("k-means needs k <= distinct points, got k = {k} with {distinct} distinct points")]
    DegenerateClustering { k: usize, distinct: usize },

    #[error("stratified split failed after {retries} retries: {reason}")]
    SplitRetriesExhausted { retries: usize, reason: String },

    #[error("generator gave up after {retries} retries: {reason}")]
    GeneratorRetriesExhausted { retries: usize, reason: String },

    #[error("candidate meta-path union produced an empty adjacency")]
    EmptyCandidateUnion,

    #[error("invalid generator spec: {0}")]
    InvalidGeneratorSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
