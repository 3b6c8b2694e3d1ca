//! Typed heterogeneous graph representation.
//!
//! Nodes carry exactly one type; edges are undirected, unweighted and
//! stored once. Ingestion applies a canonical reordering that groups nodes
//! of the same type into contiguous index ranges (sorted by type label,
//! then by input order) so that grouped aggregation downstream operates on
//! contiguous column blocks. The original id of every node is retained.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sparse::SparseRowMatrix;

/// One record of the node table.
#[derive(Debug, Clone)]
pub struct NodeRecord {
    pub id: String,
    pub node_type: String,
    pub label: Option<String>,
}

impl NodeRecord {
    pub fn new(id: impl Into<String>, node_type: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            node_type: node_type.into(),
            label: None,
        }
    }
}

/// One record of the edge table.
#[derive(Debug, Clone)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub edge_type: Option<String>,
}

impl EdgeRecord {
    pub fn new(src: impl Into<String>, dst: impl Into<String>) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            edge_type: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HinGraph {
    /// Original node ids, in canonical order.
    node_ids: Vec<String>,
    /// Per-node type id, in canonical order.
    node_types: Vec<usize>,
    /// Type names, sorted; the position is the type id.
    type_names: Vec<String>,
    /// Contiguous canonical index range of each type.
    type_ranges: Vec<std::ops::Range<usize>>,
    /// Undirected edges as canonical index pairs (u < v), deduplicated.
    edges: Vec<(usize, usize)>,
    /// Edge type names observed at ingestion.
    edge_type_names: Vec<String>,
    /// Old id -> canonical index.
    id_index: HashMap<String, usize>,
}

impl HinGraph {
    /// Ingest node and edge tables.
    ///
    /// Duplicate edges collapse to a single edge, input self-edges are
    /// dropped (the diagonal is owned by [`HinGraph::augment`]), and
    /// directed input is symmetrized.
    pub fn build(nodes: &[NodeRecord], edges: &[EdgeRecord]) -> Result<Self> {
        let mut type_names: Vec<String> = nodes.iter().map(|n| n.node_type.clone()).collect();
        type_names.sort();
        type_names.dedup();
        let type_id: HashMap<&str, usize> = type_names
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();

        // Canonical ordering: stable sort by type label keeps input order
        // within each type.
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by_key(|&i| type_id[nodes[i].node_type.as_str()]);

        let mut node_ids = Vec::with_capacity(nodes.len());
        let mut node_types = Vec::with_capacity(nodes.len());
        let mut id_index = HashMap::with_capacity(nodes.len());
        for (canonical, &input_pos) in order.iter().enumerate() {
            let rec = &nodes[input_pos];
            if id_index.insert(rec.id.clone(), canonical).is_some() {
                return Err(Error::DuplicateNodeId(rec.id.clone()));
            }
            node_ids.push(rec.id.clone());
            node_types.push(type_id[rec.node_type.as_str()]);
        }

        let mut type_ranges = Vec::with_capacity(type_names.len());
        let mut start = 0;
        for t in 0..type_names.len() {
            let end = start + node_types[start..].iter().take_while(|&&x| x == t).count();
            type_ranges.push(start..end);
            start = end;
        }

        let mut edge_pairs: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        let mut edge_type_names: Vec<String> = Vec::new();
        for rec in edges {
            let u = *id_index.get(&rec.src).ok_or_else(|| Error::UnknownEndpoint {
                src: rec.src.clone(),
                dst: rec.dst.clone(),
                missing: rec.src.clone(),
            })?;
            let v = *id_index.get(&rec.dst).ok_or_else(|| Error::UnknownEndpoint {
                src: rec.src.clone(),
                dst: rec.dst.clone(),
                missing: rec.dst.clone(),
            })?;
            if u == v {
                continue;
            }
            edge_pairs.push((u.min(v), u.max(v)));
            let name = match &rec.edge_type {
                Some(t) => t.clone(),
                None => {
                    // Derive an edge type from the unordered endpoint types.
                    let (a, b) = (node_types[u].min(node_types[v]), node_types[u].max(node_types[v]));
                    format!("{}-{}", type_names[a], type_names[b])
                }
            };
            if !edge_type_names.contains(&name) {
                edge_type_names.push(name);
            }
        }
        edge_pairs.sort_unstable();
        edge_pairs.dedup();
        edge_type_names.sort();

        Ok(Self {
            node_ids,
            node_types,
            type_names,
            type_ranges,
            edges: edge_pairs,
            edge_type_names,
            id_index,
        })
    }

    /// A single-type graph over `n` nodes; ids are the decimal indices.
    /// Used by the synthetic generators.
    pub fn single_type(n: usize, edges: &[(usize, usize)]) -> Self {
        let nodes: Vec<NodeRecord> = (0..n).map(|i| NodeRecord::new(i.to_string(), "n")).collect();
        let recs: Vec<EdgeRecord> = edges
            .iter()
            .map(|&(u, v)| EdgeRecord::new(u.to_string(), v.to_string()))
            .collect();
        Self::build(&nodes, &recs).expect("indices are unique and in range")
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn num_types(&self) -> usize {
        self.type_names.len()
    }

    pub fn num_edge_types(&self) -> usize {
        self.edge_type_names.len()
    }

    pub fn type_names(&self) -> &[String] {
        &self.type_names
    }

    pub fn type_of(&self, node: usize) -> usize {
        self.node_types[node]
    }

    pub fn node_types(&self) -> &[usize] {
        &self.node_types
    }

    pub fn type_range(&self, type_id: usize) -> std::ops::Range<usize> {
        self.type_ranges[type_id].clone()
    }

    pub fn type_id(&self, name: &str) -> Option<usize> {
        self.type_names.iter().position(|t| t == name)
    }

    pub fn node_id(&self, node: usize) -> &str {
        &self.node_ids[node]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// True if at least one edge joins the two (unordered) node types.
    pub fn admits_edge(&self, type_a: usize, type_b: usize) -> bool {
        self.edges.iter().any(|&(u, v)| {
            let (ta, tb) = (self.node_types[u], self.node_types[v]);
            (ta == type_a && tb == type_b) || (ta == type_b && tb == type_a)
        })
    }

    /// Self-loop-augmented adjacency and its degree data.
    pub fn augment(&self) -> AugmentedAdjacency {
        let n = self.node_count();
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in &self.edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        let mut rows = Vec::with_capacity(n);
        let mut degrees = Vec::with_capacity(n);
        for (u, mut nbrs) in neighbors.into_iter().enumerate() {
            nbrs.push(u);
            nbrs.sort_unstable();
            nbrs.dedup();
            degrees.push(nbrs.len() as f64);
            rows.push(nbrs.into_iter().map(|v| (v, 1.0)).collect());
        }
        let matrix = SparseRowMatrix::from_rows(n, n, rows);
        let total_degree = degrees.iter().sum();
        AugmentedAdjacency {
            matrix,
            degrees,
            total_degree,
        }
    }

    /// Boolean adjacency between the start-type and end-type nodes of a
    /// meta-path: entry (u, v) is 1 iff at least one path instance connects
    /// them. Instance counts are not preserved.
    pub fn meta_path_adjacency(&self, path: &MetaPath) -> Result<SparseRowMatrix> {
        path.validate(self)?;
        let mut current = self.step_incidence(path.type_ids[0], path.type_ids[1]);
        for window in path.type_ids.windows(2).skip(1) {
            let hop = self.step_incidence(window[0], window[1]);
            current = current.multiply(&hop)?;
            current = booleanize(&current);
        }
        Ok(booleanize(&current))
    }

    /// 0/1 incidence between nodes of two types (local indices within each
    /// type's canonical range).
    fn step_incidence(&self, type_a: usize, type_b: usize) -> SparseRowMatrix {
        let range_a = self.type_range(type_a);
        let range_b = self.type_range(type_b);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); range_a.len()];
        for &(u, v) in &self.edges {
            if self.node_types[u] == type_a && self.node_types[v] == type_b {
                rows[u - range_a.start].push((v - range_b.start, 1.0));
            }
            if self.node_types[v] == type_a && self.node_types[u] == type_b {
                rows[v - range_a.start].push((u - range_b.start, 1.0));
            }
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            row.dedup_by_key(|&mut (c, _)| c);
        }
        SparseRowMatrix::from_rows(range_a.len(), range_b.len(), rows)
    }
}

fn booleanize(m: &SparseRowMatrix) -> SparseRowMatrix {
    let rows = (0..m.n_rows())
        .map(|r| m.iter_row(r).map(|(c, _)| (c, 1.0)).collect())
        .collect();
    SparseRowMatrix::from_rows(m.n_rows(), m.n_cols(), rows)
}

/// Self-loop-augmented adjacency `A + I` with its degree vector.
#[derive(Debug, Clone)]
pub struct AugmentedAdjacency {
    pub matrix: SparseRowMatrix,
    pub degrees: Vec<f64>,
    pub total_degree: f64,
}

impl AugmentedAdjacency {
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Symmetrically normalized adjacency with entries
    /// `a_uv / sqrt(d_u d_v)`.
    pub fn normalized(&self) -> SparseRowMatrix {
        let n = self.n();
        let rows = (0..n)
            .map(|u| {
                self.matrix
                    .iter_row(u)
                    .map(|(v, a)| (v, a / (self.degrees[u] * self.degrees[v]).sqrt()))
                    .collect()
            })
            .collect();
        SparseRowMatrix::from_rows(n, n, rows)
    }
}

/// An ordered sequence of node types denoting a compositional relation,
/// e.g. `M-D-M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaPath {
    type_ids: Vec<usize>,
    label: String,
}

impl MetaPath {
    /// Build from type names, validated against the graph: every type must
    /// occur and every consecutive pair must admit at least one edge.
    pub fn new(type_names: &[&str], graph: &HinGraph) -> Result<Self> {
        let label = type_names.join("-");
        if type_names.len() < 2 {
            return Err(Error::InvalidMetaPath {
                label,
                reason: "a meta-path needs at least two node types".into(),
            });
        }
        let mut type_ids = Vec::with_capacity(type_names.len());
        for name in type_names {
            let id = graph
                .type_id(name)
                .ok_or_else(|| Error::UnknownNodeType((*name).to_string()))?;
            type_ids.push(id);
        }
        let path = Self { type_ids, label };
        path.validate(graph)?;
        Ok(path)
    }

    /// Parse a label like `M-D-M` against the graph's schema.
    pub fn parse(label: &str, graph: &HinGraph) -> Result<Self> {
        let names: Vec<&str> = label.split('-').collect();
        Self::new(&names, graph)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn start_type(&self) -> usize {
        self.type_ids[0]
    }

    pub fn end_type(&self) -> usize {
        *self.type_ids.last().unwrap()
    }

    pub fn is_symmetric(&self) -> bool {
        let rev: Vec<usize> = self.type_ids.iter().rev().copied().collect();
        rev == self.type_ids
    }

    fn validate(&self, graph: &HinGraph) -> Result<()> {
        for &t in &self.type_ids {
            if t >= graph.num_types() {
                return Err(Error::InvalidMetaPath {
                    label: self.label.clone(),
                    reason: format!("type id {t} is not in the graph"),
                });
            }
        }
        for window in self.type_ids.windows(2) {
            if !graph.admits_edge(window[0], window[1]) {
                return Err(Error::InvalidMetaPath {
                    label: self.label.clone(),
                    reason: format!(
                        "no edge joins types {} and {}",
                        graph.type_names()[window[0]],
                        graph.type_names()[window[1]]
                    ),
                });
            }
        }
        Ok(())
    }
}
