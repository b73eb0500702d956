//! Named topology generators.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::robust::{is_rs_robust_with, CertifierConfig, HARD_ENUMERATION_LIMIT};
use super::{DirectedGraph, GraphError, NodeId, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphKind {
    Complete {
        n: usize,
    },
    /// The 7f-node topology that is 2f-robust yet admits a delay-scripted
    /// partition attack under partial asynchrony.
    Counterexample {
        f: usize,
    },
    Random {
        n: usize,
        density: f64,
        seed: u64,
    },
}

/// Block layout of the counterexample topology.
///
/// `bridge` is the block wired to feed both `low` and `high`; it is the block
/// declared malicious by the paired attack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterexampleLayout {
    pub f: usize,
    pub core: Range<NodeId>,
    pub bridge: Range<NodeId>,
    pub low: Range<NodeId>,
    pub high: Range<NodeId>,
}

impl CounterexampleLayout {
    pub fn node_count(&self) -> usize {
        7 * self.f
    }
}

pub fn counterexample_layout(f: usize) -> CounterexampleLayout {
    CounterexampleLayout {
        f,
        core: 0..4 * f,
        bridge: 4 * f..5 * f,
        low: 5 * f..6 * f,
        high: 6 * f..7 * f,
    }
}

pub fn generate(kind: &GraphKind) -> Result<DirectedGraph, GraphError> {
    match *kind {
        GraphKind::Complete { n } => DirectedGraph::complete(n),
        GraphKind::Counterexample { f } => counterexample(f),
        GraphKind::Random { n, density, seed } => random(n, density, seed),
    }
}

fn random(n: usize, density: f64, seed: u64) -> Result<DirectedGraph, GraphError> {
    if !(0.0..=1.0).contains(&density) {
        return Err(GraphError::InvalidGenerator(format!(
            "density {density} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DirectedGraph::new(n)?;
    for j in 0..n {
        for i in 0..n {
            if i != j && rng.gen::<f64>() < density {
                g.add_edge(j, i)?;
            }
        }
    }
    Ok(g)
}

fn counterexample(f: usize) -> Result<DirectedGraph, GraphError> {
    if f == 0 {
        return Err(GraphError::InvalidGenerator(
            "counterexample needs f >= 1".into(),
        ));
    }
    let layout = counterexample_layout(f);
    let mut g = DirectedGraph::new(layout.node_count())?;
    for block in [&layout.core, &layout.bridge, &layout.low, &layout.high] {
        for j in block.clone() {
            for i in block.clone().filter(|&i| i != j) {
                g.add_edge(j, i)?;
            }
        }
    }
    // donors are always the lowest-indexed nodes of the source block
    let core = layout.core.start;
    for i in layout.bridge.clone() {
        for j in core..core + 2 * f {
            g.add_edge(j, i)?;
        }
    }
    for i in layout.low.clone().chain(layout.high.clone()) {
        for j in core..core + f {
            g.add_edge(j, i)?;
        }
        for j in layout.bridge.clone() {
            g.add_edge(j, i)?;
        }
    }

    if g.min_in_degree() < 2 * f {
        return Err(GraphError::Construction(format!(
            "minimum in-degree {} below 2f = {}",
            g.min_in_degree(),
            2 * f
        )));
    }
    if g.node_count() <= HARD_ENUMERATION_LIMIT {
        let config = CertifierConfig::with_cap(g.node_count().max(super::DEFAULT_ENUMERATION_CAP));
        if let Verdict::Refuted(w) = is_rs_robust_with(&g, 2 * f, 1, &config)? {
            return Err(GraphError::Construction(format!(
                "not {}-robust: {w}",
                2 * f
            )));
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_rs_robust;

    #[test]
    fn complete_five_has_twenty_edges() {
        let g = generate(&GraphKind::Complete { n: 5 }).unwrap();
        assert_eq!(g.edge_count(), 20);
    }

    #[test]
    fn random_is_reproducible() {
        let kind = GraphKind::Random {
            n: 6,
            density: 0.5,
            seed: 1,
        };
        let a = generate(&kind).unwrap();
        assert_eq!(a, generate(&kind).unwrap());
        let other = generate(&GraphKind::Random {
            n: 6,
            density: 0.5,
            seed: 2,
        })
        .unwrap();
        assert_ne!(a, other);
        assert!(generate(&GraphKind::Random {
            n: 6,
            density: 1.5,
            seed: 1
        })
        .is_err());
    }

    #[test]
    fn counterexample_one_structure() {
        let g = generate(&GraphKind::Counterexample { f: 1 }).unwrap();
        let layout = counterexample_layout(1);
        assert_eq!(g.node_count(), 7);
        assert_eq!(g.in_neighbors(layout.bridge.start), vec![0, 1]);
        assert_eq!(g.in_neighbors(layout.low.start), vec![0, 4]);
        assert_eq!(g.in_neighbors(layout.high.start), vec![0, 4]);
        assert!(is_rs_robust(&g, 2, 1).unwrap().is_certified());
        assert!(!is_rs_robust(&g, 3, 1).unwrap().is_certified());
    }

    #[test]
    fn counterexample_two_reaches_two_f_plus_one_in_degree() {
        let g = generate(&GraphKind::Counterexample { f: 2 }).unwrap();
        assert_eq!(g.node_count(), 14);
        assert_eq!(g.min_in_degree(), 5);
    }

    #[test]
    fn counterexample_rejects_zero() {
        assert!(generate(&GraphKind::Counterexample { f: 0 }).is_err());
    }
}
