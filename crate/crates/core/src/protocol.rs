//! The ADP-MSR update executed by every normal vehicle: relative position
//! values against stored neighbor data, trimming of up to `f` extreme values
//! on each side, and the delayed relative-position control law.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("no stored value for neighbor {0}")]
    MissingNeighbor(NodeId),
    #[error("{silent} silent neighbors exceed the adversary bound f = {f}")]
    TooManyOmissions { silent: usize, f: usize },
    #[error("offset specification covers {found} vehicles, expected {expected}")]
    OffsetSize { expected: usize, found: usize },
    #[error("offset matrix is not realizable: {0}")]
    UnrealizableOffsets(String),
}

/// Last value received from a neighbor and the step at which it was generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    /// Transformed position `p_j` as observed by the receiver.
    pub value: f64,
    pub stamp: i64,
}

impl NeighborEntry {
    pub fn staleness(&self, k: i64) -> i64 {
        k - self.stamp
    }
}

/// A vehicle's stored neighbor data plus the retained set of its last filter run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborView {
    entries: BTreeMap<NodeId, NeighborEntry>,
    retained: BTreeSet<NodeId>,
}

impl NeighborView {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn store(&mut self, neighbor: NodeId, value: f64, stamp: i64) {
        self.entries
            .insert(neighbor, NeighborEntry { value, stamp });
    }

    pub fn entry(&self, neighbor: NodeId) -> Option<&NeighborEntry> {
        self.entries.get(&neighbor)
    }

    pub fn entries(&self) -> impl Iterator<Item = (NodeId, &NeighborEntry)> {
        self.entries.iter().map(|(&j, e)| (j, e))
    }

    pub fn retained(&self) -> &BTreeSet<NodeId> {
        &self.retained
    }

    pub fn set_retained(&mut self, retained: BTreeSet<NodeId>) {
        self.retained = retained;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    /// Velocity damping `alpha_i > 0`.
    pub alpha: f64,
    /// Assumed bound on malicious neighbors.
    pub f: usize,
}

/// Desired inter-vehicle offsets `delta_ij`, the target of `x_j - x_i`.
///
/// With per-vehicle offsets `eta`, `delta_ij = eta_i - eta_j`, so at formation
/// `x_i + eta_i` is the same for every vehicle: `eta_i` is how far vehicle `i`
/// trails the common reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetSpec {
    Eta(Vec<f64>),
    Delta(Vec<Vec<f64>>),
}

const REALIZABILITY_TOL: f64 = 1e-9;

impl OffsetSpec {
    pub fn zero(n: usize) -> Self {
        OffsetSpec::Eta(vec![0.0; n])
    }

    pub fn validate(&self, n: usize) -> Result<(), ProtocolError> {
        match self {
            OffsetSpec::Eta(eta) => {
                if eta.len() != n {
                    return Err(ProtocolError::OffsetSize {
                        expected: n,
                        found: eta.len(),
                    });
                }
                if let Some(bad) = eta.iter().find(|e| !e.is_finite()) {
                    return Err(ProtocolError::UnrealizableOffsets(format!(
                        "non-finite offset {bad}"
                    )));
                }
                Ok(())
            }
            OffsetSpec::Delta(m) => {
                if m.len() != n {
                    return Err(ProtocolError::OffsetSize {
                        expected: n,
                        found: m.len(),
                    });
                }
                if let Some(row) = m.iter().find(|row| row.len() != n) {
                    return Err(ProtocolError::OffsetSize {
                        expected: n,
                        found: row.len(),
                    });
                }
                for i in 0..n {
                    for j in 0..n {
                        if !m[i][j].is_finite() {
                            return Err(ProtocolError::UnrealizableOffsets(format!(
                                "delta[{i}][{j}] is not finite"
                            )));
                        }
                        if (m[i][j] + m[j][i]).abs() > REALIZABILITY_TOL {
                            return Err(ProtocolError::UnrealizableOffsets(format!(
                                "delta[{i}][{j}] != -delta[{j}][{i}]"
                            )));
                        }
                        for k in 0..n {
                            if (m[i][j] + m[j][k] - m[i][k]).abs() > REALIZABILITY_TOL {
                                return Err(ProtocolError::UnrealizableOffsets(format!(
                                    "delta[{i}][{j}] + delta[{j}][{k}] != delta[{i}][{k}]"
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn delta(&self, i: NodeId, j: NodeId) -> f64 {
        match self {
            OffsetSpec::Eta(eta) => eta[i] - eta[j],
            OffsetSpec::Delta(m) => m[i][j],
        }
    }

    /// Per-vehicle offset; for a matrix, relative to vehicle 0.
    pub fn eta(&self, i: NodeId) -> f64 {
        match self {
            OffsetSpec::Eta(eta) => eta[i],
            OffsetSpec::Delta(m) => m[i][0],
        }
    }
}

/// `stored_p_j - own_p - delta_ij` for each listed neighbor.
pub fn relative_values(
    view: &NeighborView,
    own_p: f64,
    offsets: &OffsetSpec,
    me: NodeId,
    neighbors: impl IntoIterator<Item = NodeId>,
) -> Result<Vec<(NodeId, f64)>, ProtocolError> {
    neighbors
        .into_iter()
        .map(|j| {
            let entry = view.entry(j).ok_or(ProtocolError::MissingNeighbor(j))?;
            Ok((j, entry.value - own_p - offsets.delta(me, j)))
        })
        .collect()
}

/// Descending by value, ties by ascending neighbor id.
fn extreme_order(a: &(NodeId, f64), b: &(NodeId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// ADP-MSR trimming. High side first: if fewer than `f` values are `>= 0`
/// they are all dropped, otherwise the `f` largest are. The low side then
/// applies the mirror rule to what is left. Returns the surviving neighbors.
pub fn adp_msr_filter(values: &[(NodeId, f64)], f: usize) -> BTreeSet<NodeId> {
    let mut order = values.to_vec();
    order.sort_by(extreme_order);
    let mut removed = vec![false; order.len()];

    if f > 0 {
        let high: Vec<usize> = (0..order.len()).filter(|&k| order[k].1 >= 0.0).collect();
        if high.len() < f {
            high.iter().for_each(|&k| removed[k] = true);
        } else {
            removed[..f].iter_mut().for_each(|r| *r = true);
        }

        let rest: Vec<usize> = (0..order.len()).filter(|&k| !removed[k]).collect();
        let low: Vec<usize> = rest
            .iter()
            .copied()
            .filter(|&k| order[k].1 <= 0.0)
            .collect();
        if low.len() < f {
            low.iter().for_each(|&k| removed[k] = true);
        } else {
            rest.iter().rev().take(f).for_each(|&k| removed[k] = true);
        }
    }

    order
        .iter()
        .zip(removed)
        .filter(|(_, gone)| !gone)
        .map(|(&(j, _), _)| j)
        .collect()
}

/// Trimming adjusted for `silent` neighbors that sent nothing this round:
/// each side trims at most `f - silent`.
pub fn adp_msr_filter_omissive(
    values: &[(NodeId, f64)],
    f: usize,
    silent: usize,
) -> Result<BTreeSet<NodeId>, ProtocolError> {
    if silent > f {
        return Err(ProtocolError::TooManyOmissions { silent, f });
    }
    Ok(adp_msr_filter(values, f - silent))
}

/// `sum_{j in retained} a_ij * value_j - alpha * q`.
pub fn control_input(
    retained: &BTreeSet<NodeId>,
    values: &[(NodeId, f64)],
    weight: impl Fn(NodeId) -> f64,
    alpha: f64,
    own_q: f64,
) -> f64 {
    let coupling: f64 = values
        .iter()
        .filter(|(j, _)| retained.contains(j))
        .map(|&(j, value)| weight(j) * value)
        .sum();
    coupling - alpha * own_q
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(ids: &[NodeId]) -> BTreeSet<NodeId> {
        ids.iter().copied().collect()
    }

    #[test]
    fn relative_value_examples() {
        let mut view = NeighborView::new();
        view.store(1, 10.0, 0);
        let exact = OffsetSpec::Delta(vec![vec![0.0, 6.0], vec![-6.0, 0.0]]);
        assert_eq!(
            relative_values(&view, 4.0, &exact, 0, [1]).unwrap(),
            vec![(1, 0.0)]
        );
        assert_eq!(
            relative_values(&view, 4.0, &OffsetSpec::zero(2), 0, [1]).unwrap(),
            vec![(1, 6.0)]
        );
        assert!(relative_values(&view, 4.0, &OffsetSpec::zero(2), 0, [])
            .unwrap()
            .is_empty());
        assert_eq!(
            relative_values(&NeighborView::new(), 0.0, &OffsetSpec::zero(2), 0, [1]),
            Err(ProtocolError::MissingNeighbor(1))
        );
    }

    #[test]
    fn filter_drops_one_per_side() {
        let values = [(0, 5.0), (1, 1.0), (2, -2.0)];
        assert_eq!(adp_msr_filter(&values, 1), set(&[1]));
    }

    #[test]
    fn filter_with_no_nonnegative_values() {
        // nothing >= 0, both values <= 0 are dropped
        assert_eq!(adp_msr_filter(&[(0, -1.0), (1, -3.0)], 2), set(&[]));
    }

    #[test]
    fn filter_disabled_for_zero_f() {
        let values = [(0, 5.0), (3, -1.0), (7, 0.0)];
        assert_eq!(adp_msr_filter(&values, 0), set(&[0, 3, 7]));
        assert!(adp_msr_filter(&[], 2).is_empty());
    }

    #[test]
    fn zero_value_removed_at_most_once() {
        // the lone zero is taken on the high side; the low side then has
        // one candidate (-1), fewer than f = 2, so it goes too
        let values = [(0, 0.0), (1, -1.0), (2, 3.0)];
        assert_eq!(adp_msr_filter(&values, 2), set(&[]));
        assert_eq!(adp_msr_filter(&[(0, 0.0), (1, 0.0)], 1), set(&[]));
        assert_eq!(
            adp_msr_filter(&[(0, 0.0), (1, 0.0), (2, 0.0)], 1),
            set(&[1])
        );
    }

    #[test]
    fn ties_resolved_by_id() {
        // equal maxima: the lower id is "larger"; equal minima: the higher id is "smaller"
        let values = [(4, 2.0), (1, 2.0), (2, -1.0), (3, -1.0), (0, 0.5)];
        assert_eq!(adp_msr_filter(&values, 1), set(&[0, 2, 4]));
    }

    #[test]
    fn omissive_examples() {
        let values = [(0, 5.0), (1, 1.0), (2, -2.0)];
        assert_eq!(
            adp_msr_filter_omissive(&values, 1, 1).unwrap(),
            set(&[0, 1, 2])
        );
        assert_eq!(
            adp_msr_filter_omissive(&values, 1, 0).unwrap(),
            adp_msr_filter(&values, 1)
        );
        let four = [(0, 5.0), (1, 1.0), (2, -2.0), (3, -4.0)];
        assert_eq!(adp_msr_filter_omissive(&four, 2, 1).unwrap(), set(&[1, 2]));
        assert_eq!(
            adp_msr_filter_omissive(&four, 1, 2),
            Err(ProtocolError::TooManyOmissions { silent: 2, f: 1 })
        );
    }

    #[test]
    fn control_examples() {
        let one = |_| 1.0;
        assert_eq!(control_input(&set(&[]), &[], one, 2.0, 0.0), 0.0);
        let values = [(3, 1.0), (4, 7.0)];
        assert_eq!(control_input(&set(&[3]), &values, one, 2.0, 0.0), 1.0);
        assert_eq!(control_input(&set(&[3]), &values, one, 2.0, 0.5), 0.0);
        assert_eq!(
            control_input(&set(&[3, 4]), &values, |j| j as f64, 0.0, 0.0),
            31.0
        );
    }

    #[test]
    fn offsets_validate() {
        assert!(OffsetSpec::zero(3).validate(3).is_ok());
        assert!(OffsetSpec::zero(3).validate(4).is_err());
        let good = OffsetSpec::Delta(vec![
            vec![0.0, 1.0, 3.0],
            vec![-1.0, 0.0, 2.0],
            vec![-3.0, -2.0, 0.0],
        ]);
        assert!(good.validate(3).is_ok());
        assert_eq!(good.eta(2), -3.0);
        let bad = OffsetSpec::Delta(vec![
            vec![0.0, 1.0, 3.0],
            vec![-1.0, 0.0, 5.0],
            vec![-3.0, -5.0, 0.0],
        ]);
        assert!(matches!(
            bad.validate(3),
            Err(ProtocolError::UnrealizableOffsets(_))
        ));
        let eta = OffsetSpec::Eta(vec![0.0, 10.0]);
        assert_eq!(eta.delta(1, 0), 10.0);
    }

    fn labelled_values() -> impl Strategy<Value = Vec<(f64, bool)>> {
        prop::collection::vec((-100.0..100.0f64, any::<bool>()), 0..12)
    }

    proptest! {
        #[test]
        fn removes_at_most_f_per_side(raw in labelled_values(), f in 0usize..4) {
            let values: Vec<(NodeId, f64)> = raw.iter().enumerate().map(|(j, &(v, _))| (j, v)).collect();
            let kept = adp_msr_filter(&values, f);
            prop_assert!(values.len() - kept.len() <= 2 * f);
        }

        #[test]
        fn permutation_invariant(raw in labelled_values(), f in 0usize..4, seed in any::<u64>()) {
            let values: Vec<(NodeId, f64)> = raw.iter().enumerate().map(|(j, &(v, _))| (j, v.round())).collect();
            let mut shuffled = values.clone();
            let len = shuffled.len();
            if len > 1 {
                let mut s = seed;
                for k in (1..len).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    shuffled.swap(k, (s >> 33) as usize % (k + 1));
                }
            }
            prop_assert_eq!(adp_msr_filter(&values, f), adp_msr_filter(&shuffled, f));
        }
    }
}
