//! Sparse undirected graphs with dense node features.

mod io;
mod norm;
mod sbm;
mod stats;

use std::sync::Arc;

pub use io::{
    load_dataset, load_graph, save_graph, LoadReport, EDGE_FILE, FEATURE_FILE, HEADER_FILE, LABEL_FILE, MASK_FILE,
};
pub use norm::{AdjGrad, NormalizedAdjacency};
pub use sbm::{generate_sbm, SbmParams};
pub use stats::{edge_homophily, graph_stats, pairwise_feature_similarity, GraphStats};

use crate::error::{GtransError, Result};
use crate::linalg::Matrix;

/// Node role in the train/val/test protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            "none" => Some(Split::None),
            _ => None,
        }
    }
}

/// Simple undirected edge set with both directions materialized in CSR.
///
/// `edges` is sorted with `u < v`; `entry_edge[k]` maps CSR entry `k` back to
/// its undirected edge id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    num_nodes: usize,
    edges: Vec<(u32, u32)>,
    row_offsets: Vec<usize>,
    cols: Vec<u32>,
    entry_edge: Vec<u32>,
}

/// What was cleaned up while canonicalizing an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeCleanup {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl Topology {
    /// Canonicalize, deduplicate and index an undirected edge list.
    pub fn new(num_nodes: usize, raw: &[(usize, usize)]) -> Result<(Self, EdgeCleanup)> {
        if num_nodes > u32::MAX as usize {
            return Err(GtransError::Domain(format!("{num_nodes} nodes exceeds u32 range")));
        }
        let mut cleanup = EdgeCleanup::default();
        let mut edges = Vec::with_capacity(raw.len());
        for &(a, b) in raw {
            if a >= num_nodes || b >= num_nodes {
                return Err(GtransError::Domain(format!(
                    "edge ({a},{b}) out of range for {num_nodes} nodes"
                )));
            }
            if a == b {
                cleanup.self_loops += 1;
                continue;
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            edges.push((u as u32, v as u32));
        }
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        cleanup.duplicates = before - edges.len();
        Ok((Self::from_canonical(num_nodes, edges), cleanup))
    }

    /// Build from an edge list already sorted, deduplicated and with `u < v`.
    fn from_canonical(num_nodes: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        row_offsets.push(0);
        for d in &degree {
            row_offsets.push(row_offsets.last().unwrap() + d);
        }
        let total = *row_offsets.last().unwrap();
        let mut cols = vec![0u32; total];
        let mut entry_edge = vec![0u32; total];
        let mut fill = row_offsets[..num_nodes].to_vec();
        for (e, &(u, v)) in edges.iter().enumerate() {
            let (u, v) = (u as usize, v as usize);
            cols[fill[u]] = v as u32;
            entry_edge[fill[u]] = e as u32;
            fill[u] += 1;
            cols[fill[v]] = u as u32;
            entry_edge[fill[v]] = e as u32;
            fill[v] += 1;
        }
        // Rows come out sorted by neighbour because `edges` is sorted
        // lexicographically and each row collects lower then higher ids.
        Self {
            num_nodes,
            edges,
            row_offsets,
            cols,
            entry_edge,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        let (u, v) = self.edges[e];
        (u as usize, v as usize)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    /// `(neighbour, edge id)` pairs of node `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.entry_edge[r])
            .map(|(&c, &e)| (c as usize, e as usize))
    }

    pub fn csr_len(&self) -> usize {
        self.cols.len()
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { (a as u32, b as u32) } else { (b as u32, a as u32) };
        self.edges.binary_search(&key).ok()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.find_edge(a, b).is_some()
    }

    /// Sub-topology keeping edges where `keep[e]` holds.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Topology {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(e, _)| keep(*e))
            .map(|(_, &p)| p)
            .collect();
        Self::from_canonical(self.num_nodes, edges)
    }
}

/// The dataset unit: structure, features, labels and split roles.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    topology: Arc<Topology>,
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    splits: Vec<Split>,
}

impl Graph {
    pub fn new(
        topology: Topology,
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        splits: Vec<Split>,
    ) -> Result<Self> {
        let n = topology.num_nodes();
        if features.rows() != n {
            return Err(GtransError::Dimension(format!(
                "{} feature rows for {n} nodes",
                features.rows()
            )));
        }
        if labels.len() != n || splits.len() != n {
            return Err(GtransError::Dimension(format!(
                "{} labels and {} split entries for {n} nodes",
                labels.len(),
                splits.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(GtransError::Domain(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        if !features.is_finite() {
            return Err(GtransError::Domain("non-finite feature value".into()));
        }
        Ok(Self {
            topology: Arc::new(topology),
            features,
            labels,
            num_classes,
            splits,
        })
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn num_nodes(&self) -> usize {
        self.topology.num_nodes()
    }

    pub fn num_edges(&self) -> usize {
        self.topology.num_edges()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        self.topology.edges()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn nodes_in(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// Same nodes, labels and splits with a different edge set.
    pub fn with_topology(&self, topology: Topology) -> Result<Self> {
        if topology.num_nodes() != self.num_nodes() {
            return Err(GtransError::Domain("node count changed".into()));
        }
        Ok(Self {
            topology: Arc::new(topology),
            ..self.clone()
        })
    }

    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        if features.rows() != self.num_nodes() {
            return Err(GtransError::Dimension(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                self.num_nodes()
            )));
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    /// Apply a node permutation: new node `perm[i]` is old node `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let mut inverse = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let edges: Vec<_> = self
            .edges()
            .iter()
            .map(|&(u, v)| (perm[u as usize], perm[v as usize]))
            .collect();
        let (topo, _) = Topology::new(n, &edges)?;
        Graph::new(
            topo,
            self.features.gather_rows(&inverse),
            inverse.iter().map(|&o| self.labels[o]).collect(),
            self.num_classes,
            inverse.iter().map(|&o| self.splits[o]).collect(),
        )
    }
}
