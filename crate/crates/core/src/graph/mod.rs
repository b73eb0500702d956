//! Directed communication topologies and their robustness properties.
//!
//! Edges are stored as `(from, to)` pairs: `(j, i)` is an incoming link of
//! node `i`, so `j` belongs to the neighbor set `N_i` and contributes the
//! adjacency weight `a_ij`.

mod connectivity;
mod edgelist;
mod generate;
mod robust;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use connectivity::{
    has_spanning_tree, is_strongly_connected, rooted_connectivity, vertex_connectivity,
};
pub use edgelist::{parse_edge_list, to_edge_list};
pub use generate::{counterexample_layout, generate, CounterexampleLayout, GraphKind};
pub use robust::{
    first_failing_window, is_jointly_r_robust, is_rs_robust, is_rs_robust_with, max_robustness,
    max_robustness_with, violates_definition, CertifierConfig, GraphSequence, RobustnessReport,
    Verdict, Witness, DEFAULT_ENUMERATION_CAP, HARD_ENUMERATION_LIMIT,
};

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("a graph needs more than one node (got {0})")]
    TooFewNodes(usize),
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("edge ({from}, {to}) has non-positive or non-finite weight {weight}")]
    BadWeight {
        from: NodeId,
        to: NodeId,
        weight: f64,
    },
    #[error(
        "robustness parameters out of range: need 0 <= r < n, 1 <= s < n (r={r}, s={s}, n={n})"
    )]
    ParameterOutOfRange { r: usize, s: usize, n: usize },
    #[error("exhaustive certification refused: {n} nodes exceeds the enumeration cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("enumeration cap {0} exceeds the hard limit of {HARD_ENUMERATION_LIMIT}")]
    CapTooLarge(usize),
    #[error("graph sequence members disagree on node count ({expected} vs {found})")]
    NodeCountMismatch { expected: usize, found: usize },
    #[error("graph sequence is empty")]
    EmptySequence,
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("generator parameter invalid: {0}")]
    InvalidGenerator(String),
    #[error("generated graph failed its own certification: {0}")]
    Construction(String),
}

/// A weighted digraph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectedGraph {
    n: usize,
    edges: BTreeMap<(NodeId, NodeId), f64>,
}

impl DirectedGraph {
    pub fn new(n: usize) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        Ok(Self {
            n,
            edges: BTreeMap::new(),
        })
    }

    /// Builds a graph from unit-weight `(from, to)` pairs.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::new(n)?;
        for (j, i) in edges {
            g.add_edge(j, i)?;
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(
            n,
            (0..n).flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (j, i))),
        )
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn add_edge(&mut self, from: NodeId, to: NodeId) -> Result<(), GraphError> {
        self.add_weighted_edge(from, to, 1.0)
    }

    /// Inserts or overwrites the link `from -> to`.
    pub fn add_weighted_edge(
        &mut self,
        from: NodeId,
        to: NodeId,
        weight: f64,
    ) -> Result<(), GraphError> {
        self.check_node(from)?;
        self.check_node(to)?;
        if from == to {
            return Err(GraphError::SelfLoop(from));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(GraphError::BadWeight { from, to, weight });
        }
        self.edges.insert((from, to), weight);
        Ok(())
    }

    pub fn remove_edge(&mut self, from: NodeId, to: NodeId) -> bool {
        self.edges.remove(&(from, to)).is_some()
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains_key(&(from, to))
    }

    /// Adjacency entry `a_ij` for the link `j -> i`; zero when absent.
    pub fn weight(&self, from: NodeId, to: NodeId) -> f64 {
        self.edges.get(&(from, to)).copied().unwrap_or(0.0)
    }

    /// `(from, to, weight)` in lexicographic `(from, to)` order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.edges.iter().map(|(&(j, i), &w)| (j, i, w))
    }

    /// Incoming neighbors `N_i`, ascending.
    pub fn in_neighbors(&self, node: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .edges
            .keys()
            .filter(|&&(_, i)| i == node)
            .map(|&(j, _)| j)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn out_neighbors(&self, node: NodeId) -> Vec<NodeId> {
        self.edges
            .keys()
            .filter(|&&(j, _)| j == node)
            .map(|&(_, i)| i)
            .collect()
    }

    pub fn in_degree(&self, node: NodeId) -> usize {
        self.edges.keys().filter(|&&(_, i)| i == node).count()
    }

    pub fn min_in_degree(&self) -> usize {
        (0..self.n).map(|i| self.in_degree(i)).min().unwrap_or(0)
    }

    /// In-neighbor sets as bitmasks; only meaningful for `n <= 64`.
    pub(crate) fn in_masks(&self) -> Vec<u64> {
        let mut masks = vec![0u64; self.n];
        for &(j, i) in self.edges.keys() {
            masks[i] |= 1u64 << j;
        }
        masks
    }

    /// Edge union; weights of shared edges take the larger value.
    pub fn union(&self, other: &DirectedGraph) -> Result<DirectedGraph, GraphError> {
        if self.n != other.n {
            return Err(GraphError::NodeCountMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut out = self.clone();
        for (j, i, w) in other.edges() {
            let entry = out.edges.entry((j, i)).or_insert(w);
            if w > *entry {
                *entry = w;
            }
        }
        Ok(out)
    }

    /// Copy of the graph with node `extra` appended and the given incoming links to it.
    pub fn with_added_node(
        &self,
        incoming: impl IntoIterator<Item = NodeId>,
    ) -> Result<DirectedGraph, GraphError> {
        let mut out = DirectedGraph {
            n: self.n + 1,
            edges: self.edges.clone(),
        };
        let new = self.n;
        for j in incoming {
            out.add_edge(j, new)?;
        }
        Ok(out)
    }

    fn check_node(&self, node: NodeId) -> Result<(), GraphError> {
        if node >= self.n {
            return Err(GraphError::NodeOutOfRange { node, n: self.n });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_loops_and_bad_nodes() {
        let mut g = DirectedGraph::new(3).unwrap();
        assert_eq!(g.add_edge(1, 1), Err(GraphError::SelfLoop(1)));
        assert!(matches!(
            g.add_edge(0, 3),
            Err(GraphError::NodeOutOfRange { node: 3, n: 3 })
        ));
        assert!(matches!(
            g.add_weighted_edge(0, 1, 0.0),
            Err(GraphError::BadWeight { .. })
        ));
        assert!(DirectedGraph::new(1).is_err());
    }

    #[test]
    fn complete_graph_edge_count() {
        let g = DirectedGraph::complete(5).unwrap();
        assert_eq!(g.edge_count(), 20);
        assert_eq!(g.in_neighbors(2), vec![0, 1, 3, 4]);
        assert_eq!(g.min_in_degree(), 4);
    }

    #[test]
    fn absent_edges_have_zero_weight() {
        let mut g = DirectedGraph::new(3).unwrap();
        g.add_weighted_edge(0, 1, 2.5).unwrap();
        assert_eq!(g.weight(0, 1), 2.5);
        assert_eq!(g.weight(1, 0), 0.0);
    }

    #[test]
    fn union_keeps_larger_weight() {
        let mut a = DirectedGraph::new(3).unwrap();
        a.add_weighted_edge(0, 1, 2.0).unwrap();
        let mut b = DirectedGraph::new(3).unwrap();
        b.add_weighted_edge(0, 1, 3.0).unwrap();
        b.add_edge(1, 2).unwrap();
        let u = a.union(&b).unwrap();
        assert_eq!(u.weight(0, 1), 3.0);
        assert!(u.has_edge(1, 2));
        assert!(a.union(&DirectedGraph::new(4).unwrap()).is_err());
    }
}
