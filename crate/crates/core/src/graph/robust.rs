//! Exact (r,s)-robustness certification by exhaustive subset-pair enumeration.
//!
//! For a subset `S`, `X^r_S` is the set of nodes of `S` with at least `r`
//! in-neighbors outside `S`. A pair of nonempty disjoint subsets `(V1, V2)`
//! violates (r,s)-robustness when `X^r_V1 != V1`, `X^r_V2 != V2` and
//! `|X^r_V1| + |X^r_V2| < s`. The certifier tabulates `X^r_S` for every
//! subset once and then walks every ordered pair, so the cost is `O(3^n)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DirectedGraph, GraphError, NodeId};

pub const DEFAULT_ENUMERATION_CAP: usize = 12;
/// Upper bound accepted for an overridden cap; `X` tables are `2^n` words.
pub const HARD_ENUMERATION_LIMIT: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CertifierConfig {
    /// Largest node count the certifier will enumerate.
    pub cap: usize,
    /// Worker threads; `None` uses the global rayon pool, `Some(1)` runs inline.
    pub threads: Option<usize>,
}

impl Default for CertifierConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ENUMERATION_CAP,
            threads: None,
        }
    }
}

impl CertifierConfig {
    pub fn with_cap(cap: usize) -> Self {
        Self {
            cap,
            ..Self::default()
        }
    }

    pub fn single_threaded(self) -> Self {
        Self {
            threads: Some(1),
            ..self
        }
    }

    fn admit(&self, n: usize) -> Result<(), GraphError> {
        if self.cap > HARD_ENUMERATION_LIMIT {
            return Err(GraphError::CapTooLarge(self.cap));
        }
        if n > self.cap {
            return Err(GraphError::TooLarge { n, cap: self.cap });
        }
        Ok(())
    }
}

/// A pair of nonempty disjoint node sets violating all three robustness conditions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub first: Vec<NodeId>,
    pub second: Vec<NodeId>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[NodeId]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        write!(
            f,
            "V1 = {{{}}}, V2 = {{{}}}",
            join(&self.first),
            join(&self.second)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Certified,
    Refuted(Witness),
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::Certified)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Certified => None,
            Verdict::Refuted(w) => Some(w),
        }
    }
}

fn check_params(n: usize, r: usize, s: usize) -> Result<(), GraphError> {
    if r >= n || s >= n || s < 1 {
        return Err(GraphError::ParameterOutOfRange { r, s, n });
    }
    Ok(())
}

fn mask_to_nodes(mask: u64) -> Vec<NodeId> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

fn nodes_to_mask(nodes: &[NodeId]) -> u64 {
    nodes.iter().fold(0, |m, &i| m | 1u64 << i)
}

/// `X^r_S` for every subset `S` of the node set.
fn reachable_table(masks: &[u64], r: usize) -> Vec<u64> {
    let n = masks.len();
    let full = (1u64 << n) - 1;
    (0..=full)
        .map(|set| {
            let outside = !set & full;
            let mut x = 0u64;
            let mut rest = set;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if (masks[i] & outside).count_ones() as usize >= r {
                    x |= 1u64 << i;
                }
            }
            x
        })
        .collect()
}

/// Whether `(first, second)` violates (r,s)-robustness in `g`.
///
/// Returns `false` for empty or overlapping sets, which are not candidate pairs.
pub fn violates_definition(
    g: &DirectedGraph,
    r: usize,
    s: usize,
    first: &[NodeId],
    second: &[NodeId],
) -> bool {
    let n = g.node_count();
    if first.iter().chain(second).any(|&i| i >= n) {
        return false;
    }
    let v1 = nodes_to_mask(first);
    let v2 = nodes_to_mask(second);
    if v1 == 0 || v2 == 0 || v1 & v2 != 0 {
        return false;
    }
    let masks = g.in_masks();
    let full = (1u64 << n) - 1;
    let x = |set: u64| {
        mask_to_nodes(set)
            .into_iter()
            .filter(|&i| (masks[i] & !set & full).count_ones() as usize >= r)
            .fold(0u64, |m, i| m | 1u64 << i)
    };
    let (x1, x2) = (x(v1), x(v2));
    x1 != v1 && x2 != v2 && ((x1.count_ones() + x2.count_ones()) as usize) < s
}

pub fn is_rs_robust(g: &DirectedGraph, r: usize, s: usize) -> Result<Verdict, GraphError> {
    is_rs_robust_with(g, r, s, &CertifierConfig::default())
}

/// Decides (r,s)-robustness; the witness on refutation is the first violating
/// pair in `(V1, V2)` mask order, independent of the thread count.
pub fn is_rs_robust_with(
    g: &DirectedGraph,
    r: usize,
    s: usize,
    config: &CertifierConfig,
) -> Result<Verdict, GraphError> {
    let n = g.node_count();
    check_params(n, r, s)?;
    config.admit(n)?;
    if r == 0 {
        return Ok(Verdict::Certified);
    }
    let table = reachable_table(&g.in_masks(), r);
    let full = (1u64 << n) - 1;

    let violation_with_first = |v1: u64| -> Option<(u64, u64)> {
        let x1 = table[v1 as usize];
        if x1 == v1 {
            return None;
        }
        let c1 = x1.count_ones() as usize;
        if c1 >= s {
            return None;
        }
        let rest = full & !v1;
        // ascending nonempty submasks of `rest`
        let mut v2 = rest.wrapping_neg() & rest;
        while v2 != 0 {
            let x2 = table[v2 as usize];
            if x2 != v2 && c1 + (x2.count_ones() as usize) < s {
                return Some((v1, v2));
            }
            v2 = v2.wrapping_sub(rest) & rest;
        }
        None
    };

    let found = match config.threads {
        Some(1) => (1..full).find_map(violation_with_first),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .expect("thread pool construction");
            pool.install(|| {
                (1..full)
                    .into_par_iter()
                    .find_map_first(violation_with_first)
            })
        }
        None => (1..full)
            .into_par_iter()
            .find_map_first(violation_with_first),
    };

    Ok(match found {
        None => Verdict::Certified,
        Some((v1, v2)) => Verdict::Refuted(Witness {
            first: mask_to_nodes(v1),
            second: mask_to_nodes(v2),
        }),
    })
}

/// Certification results over the `(r, s)` lattice of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub n: usize,
    pub certified: BTreeSet<(usize, usize)>,
    pub refuted: BTreeMap<(usize, usize), Witness>,
}

impl RobustnessReport {
    pub fn is_certified(&self, r: usize, s: usize) -> bool {
        self.certified.contains(&(r, s))
    }

    /// Largest `r` for which the graph is r-robust.
    pub fn max_r(&self) -> usize {
        self.certified
            .iter()
            .filter(|&&(_, s)| s == 1)
            .map(|&(r, _)| r)
            .max()
            .unwrap_or(0)
    }

    pub fn max_s(&self, r: usize) -> Option<usize> {
        self.certified
            .iter()
            .filter(|&&(rr, _)| rr == r)
            .map(|&(_, s)| s)
            .max()
    }

    /// The lexicographically largest certified pair.
    pub fn top(&self) -> Option<(usize, usize)> {
        self.certified.iter().next_back().copied()
    }

    /// No certified pair dominates a refuted one.
    pub fn is_downward_consistent(&self) -> bool {
        self.certified
            .iter()
            .all(|&(r, s)| self.refuted.keys().all(|&(rr, ss)| !(rr <= r && ss <= s)))
    }
}

impl fmt::Display for RobustnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let max_r = self
            .certified
            .iter()
            .chain(self.refuted.keys())
            .map(|&(r, _)| r)
            .max()
            .unwrap_or(0);
        write!(f, "r\\s")?;
        for s in 1..self.n {
            write!(f, " {s:>3}")?;
        }
        writeln!(f)?;
        for r in (0..=max_r).rev() {
            write!(f, "{r:>3}")?;
            for s in 1..self.n {
                let mark = if self.is_certified(r, s) {
                    "yes"
                } else {
                    " no"
                };
                write!(f, " {mark}")?;
            }
            writeln!(f)?;
        }
        match self.top() {
            Some((r, s)) => write!(f, "top certified pair: ({r}, {s})"),
            None => write!(f, "no certified pair"),
        }
    }
}

pub fn max_robustness(g: &DirectedGraph) -> Result<RobustnessReport, GraphError> {
    max_robustness_with(g, &CertifierConfig::default())
}

/// Evaluates every `(r, s)` with `r <= ceil(n/2)` (and `r < n`), `1 <= s <= n - 1`.
pub fn max_robustness_with(
    g: &DirectedGraph,
    config: &CertifierConfig,
) -> Result<RobustnessReport, GraphError> {
    let n = g.node_count();
    config.admit(n)?;
    let r_max = n.div_ceil(2).min(n - 1);
    let mut report = RobustnessReport {
        n,
        certified: BTreeSet::new(),
        refuted: BTreeMap::new(),
    };
    for r in 0..=r_max {
        for s in 1..n {
            match is_rs_robust_with(g, r, s, config)? {
                Verdict::Certified => {
                    report.certified.insert((r, s));
                }
                Verdict::Refuted(w) => {
                    report.refuted.insert((r, s), w);
                }
            }
        }
    }
    Ok(report)
}

/// A time-varying topology `G[0], G[1], ...` with a joint-robustness window.
///
/// The engine reads it periodically: the graph in force at step `k` is
/// `graphs[k % len]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSequence {
    graphs: Vec<DirectedGraph>,
    window: usize,
}

impl GraphSequence {
    pub fn new(graphs: Vec<DirectedGraph>, window: usize) -> Result<Self, GraphError> {
        let first = graphs.first().ok_or(GraphError::EmptySequence)?;
        if window == 0 {
            return Err(GraphError::ZeroWindow);
        }
        let n = first.node_count();
        if let Some(bad) = graphs.iter().find(|g| g.node_count() != n) {
            return Err(GraphError::NodeCountMismatch {
                expected: n,
                found: bad.node_count(),
            });
        }
        Ok(Self { graphs, window })
    }

    pub fn node_count(&self) -> usize {
        self.graphs[0].node_count()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn graphs(&self) -> &[DirectedGraph] {
        &self.graphs
    }

    pub fn graph_at(&self, step: usize) -> &DirectedGraph {
        &self.graphs[step % self.graphs.len()]
    }

    /// Union of every member graph.
    pub fn union_all(&self) -> DirectedGraph {
        self.graphs
            .iter()
            .skip(1)
            .fold(self.graphs[0].clone(), |acc, g| {
                acc.union(g).expect("node counts checked at construction")
            })
    }

    /// Unions over every run of `window` consecutive graphs. A sequence
    /// shorter than the window yields one partial window over all of it.
    pub fn window_unions(&self) -> Vec<DirectedGraph> {
        let len = self.graphs.len();
        let starts = len.saturating_sub(self.window) + 1;
        (0..starts)
            .map(|start| {
                let end = (start + self.window).min(len);
                self.graphs[start + 1..end]
                    .iter()
                    .fold(self.graphs[start].clone(), |acc, g| {
                        acc.union(g).expect("node counts checked at construction")
                    })
            })
            .collect()
    }
}

/// First window (by start index) whose union is not r-robust.
pub fn first_failing_window(
    seq: &GraphSequence,
    r: usize,
    config: &CertifierConfig,
) -> Result<Option<(usize, Witness)>, GraphError> {
    for (start, union) in seq.window_unions().iter().enumerate() {
        if let Verdict::Refuted(w) = is_rs_robust_with(union, r, 1, config)? {
            return Ok(Some((start, w)));
        }
    }
    Ok(None)
}

pub fn is_jointly_r_robust(
    seq: &GraphSequence,
    r: usize,
    config: &CertifierConfig,
) -> Result<bool, GraphError> {
    Ok(first_failing_window(seq, r, config)?.is_none())
}
