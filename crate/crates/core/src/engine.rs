//! Step-driven scenario execution and run metrics.
//!
//! Per step `k`, in vehicle-id order: deliver the value stamped
//! `k - tau_ij[k]` on every active link into the receiver's inbox; at the
//! receiver's update steps copy the inbox into its view and re-run the filter;
//! compute every vehicle's input; record the row; advance the dynamics.
//!
//! History before step 0 is flat in the moving frame: a vehicle's `p` at any
//! negative step equals `p[0]`. Each view is pre-filled with the step-0
//! delivery and filtered once before the loop starts.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::adversary::{emitted_value, Emission, EvalContext};
use crate::adversary::{AttackScript, DelaySchedule};
use crate::graph::{
    is_rs_robust, violates_definition, DirectedGraph, GraphError, NodeId, Verdict, Witness,
};
use crate::model::{ModelError, VehicleState};
use crate::protocol::{
    adp_msr_filter, adp_msr_filter_omissive, control_input, relative_values, NeighborView,
    OffsetSpec, ProtocolError,
};
use crate::scenario::{GraphSpec, Prepared, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(
        "step {k}: value from {from} at vehicle {to} is {staleness} steps old, above tau = {tau}"
    )]
    StaleValue {
        k: usize,
        from: NodeId,
        to: NodeId,
        staleness: i64,
        tau: u64,
    },
    #[error("step {k}: vehicle {to} has never received a value from {from}")]
    MissingValue { k: usize, from: NodeId, to: NodeId },
    #[error("step {k}, vehicle {vehicle}: {source}")]
    Protocol {
        k: usize,
        vehicle: NodeId,
        source: ProtocolError,
    },
    #[error("step {k}, vehicle {vehicle}: {source}")]
    Model {
        k: usize,
        vehicle: NodeId,
        source: ModelError,
    },
    #[error("necessity scenario: {0}")]
    Witness(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub x: f64,
    pub v: f64,
    pub u: f64,
    pub updated: bool,
    /// Neighbors kept by the most recent filter run; `None` for malicious vehicles.
    pub retained: Option<Vec<NodeId>>,
}

/// `horizon + 1` rows of per-vehicle records.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<Vec<VehicleRecord>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> &[VehicleRecord] {
        self.rows.last().expect("trace has at least one row")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    /// Coefficient of determination of the log-linear fit.
    pub fit: f64,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Converged {
        step: usize,
    },
    NotConverged,
    /// Zero horizon: nothing to judge.
    NoVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Largest formation error over normal pairs, `max |x_j - x_i - delta_ij|`.
    pub dx: Vec<f64>,
    /// Largest velocity error over normal vehicles, `max |v_i - r|`.
    pub dv: Vec<f64>,
    pub convergence: Convergence,
    /// Clusters of final formation coordinates separated by gaps above `10 * epsilon`.
    pub groups: usize,
    pub rate: Option<RateFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trace: Trace,
    pub metrics: Metrics,
}

struct Inbox {
    value: f64,
    stamp: i64,
}

pub fn run(scenario: &Scenario) -> Result<RunResult, EngineError> {
    let prepared = scenario.prepare()?;
    let trace = simulate(scenario, &prepared)?;
    let metrics = compute_metrics(scenario, &prepared, &trace);
    Ok(RunResult { trace, metrics })
}

fn simulate(scenario: &Scenario, prep: &Prepared) -> Result<Trace, EngineError> {
    let n = scenario.n;
    let horizon = scenario.horizon;
    let params = prep.params;
    let period = params.sample_period;
    let tau = scenario.delays.tau;
    let ctx = |k: i64| EvalContext {
        k,
        period,
        target_velocity: params.target_velocity,
    };

    let mut state: Vec<VehicleState> = (0..n)
        .map(|i| VehicleState::new(scenario.initial_x[i], scenario.initial_v[i]))
        .collect();
    let p0: Vec<f64> = state
        .iter()
        .map(|s| s.to_transformed(0, &params).p)
        .collect();
    // raw positions, one row per completed step
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
    let in_union: Vec<Vec<NodeId>> = (0..n).map(|i| prep.union.in_neighbors(i)).collect();

    let mut inbox: Vec<Vec<Option<Inbox>>> =
        (0..n).map(|_| (0..n).map(|_| None).collect()).collect();
    let mut silent_now = vec![vec![false; n]; n];
    let mut views: Vec<NeighborView> = (0..n).map(|_| NeighborView::new()).collect();
    let mut rows = Vec::with_capacity(horizon + 1);

    // observed transformed position of sender j at stamp s, or None if silent
    let observe = |history: &[Vec<f64>], j: NodeId, i: NodeId, s: i64| -> Option<f64> {
        let true_x = if s >= 0 {
            history[s as usize][j]
        } else {
            p0[j] + params.reference_position(s)
        };
        let x = match prep.scripts.get(&j) {
            None => true_x,
            Some(script) => match emitted_value(script, &ctx(s), i, true_x, prep.sensing[i]) {
                Emission::Value(x) => x,
                Emission::Silent => return None,
            },
        };
        Some(x - params.reference_position(s))
    };

    for k in 0..=horizon {
        let ki = k as i64;
        history.push(state.iter().map(|s| s.x).collect());
        let graph = prep.graph_at(k);

        for i in prep.normal() {
            for j in graph.in_neighbors(i) {
                let s = ki - scenario.delays.delay(j, i, ki) as i64;
                if inbox[i][j].as_ref().is_some_and(|b| s < b.stamp) {
                    continue;
                }
                match observe(&history, j, i, s) {
                    Some(value) => {
                        inbox[i][j] = Some(Inbox { value, stamp: s });
                        silent_now[i][j] = false;
                    }
                    None => silent_now[i][j] = true,
                }
            }
        }

        let mut updated = vec![false; n];
        for i in prep.normal() {
            let warm_up = k == 0;
            if !(warm_up || prep.updates[i].is_update(k as u64)) {
                continue;
            }
            updated[i] = prep.updates[i].is_update(k as u64);
            for &j in &in_union[i] {
                if let Some(b) = &inbox[i][j] {
                    views[i].store(j, b.value, b.stamp);
                }
            }
            let own_p = state[i].to_transformed(ki, &params).p;
            let active: Vec<NodeId> = if prep.is_time_varying() {
                in_union[i]
                    .iter()
                    .copied()
                    .filter(|&j| {
                        views[i]
                            .entry(j)
                            .is_some_and(|e| e.staleness(ki) <= tau as i64)
                    })
                    .collect()
            } else {
                in_union[i].clone()
            };
            let (silent, heard): (Vec<NodeId>, Vec<NodeId>) = active
                .into_iter()
                .partition(|&j| scenario.omissive && silent_now[i][j]);
            for &j in &heard {
                let Some(entry) = views[i].entry(j) else {
                    return Err(EngineError::MissingValue { k, from: j, to: i });
                };
                let staleness = entry.staleness(ki);
                if staleness > tau as i64 {
                    return Err(EngineError::StaleValue {
                        k,
                        from: j,
                        to: i,
                        staleness,
                        tau,
                    });
                }
            }
            let protocol = |source| EngineError::Protocol {
                k,
                vehicle: i,
                source,
            };
            let values = relative_values(&views[i], own_p, &prep.offsets, i, heard.iter().copied())
                .map_err(protocol)?;
            let retained = if scenario.omissive {
                adp_msr_filter_omissive(&values, scenario.f, silent.len()).map_err(protocol)?
            } else {
                adp_msr_filter(&values, scenario.f)
            };
            views[i].set_retained(retained);
        }

        let mut inputs = vec![0.0; n];
        for i in 0..n {
            inputs[i] = match prep.scripts.get(&i) {
                Some(script) => script.motion.input(&ctx(ki), state[i]),
                None => {
                    let own = state[i].to_transformed(ki, &params);
                    let retained = views[i].retained();
                    let values = relative_values(
                        &views[i],
                        own.p,
                        &prep.offsets,
                        i,
                        retained.iter().copied(),
                    )
                    .map_err(|source| EngineError::Protocol {
                        k,
                        vehicle: i,
                        source,
                    })?;
                    control_input(
                        retained,
                        &values,
                        |j| prep.union.weight(j, i),
                        scenario.alpha[i],
                        own.q,
                    )
                }
            };
        }

        rows.push(
            (0..n)
                .map(|i| VehicleRecord {
                    x: state[i].x,
                    v: state[i].v,
                    u: inputs[i],
                    updated: updated[i],
                    retained: (!prep.is_malicious(i))
                        .then(|| views[i].retained().iter().copied().collect()),
                })
                .collect(),
        );

        if k < horizon {
            for i in 0..n {
                state[i] =
                    state[i]
                        .step(inputs[i], period)
                        .map_err(|source| EngineError::Model {
                            k,
                            vehicle: i,
                            source,
                        })?;
            }
        }
    }
    Ok(Trace { rows })
}

/// `x_i + eta_i`: equal across vehicles exactly when the formation is met.
fn formation_coordinate(offsets: &OffsetSpec, i: NodeId, x: f64) -> f64 {
    x + offsets.eta(i)
}

fn compute_metrics(scenario: &Scenario, prep: &Prepared, trace: &Trace) -> Metrics {
    let normal: Vec<NodeId> = prep.normal().collect();
    let r = scenario.target_velocity;
    let mut dx = Vec::with_capacity(trace.len());
    let mut dv = Vec::with_capacity(trace.len());
    for row in &trace.rows {
        let coords = normal
            .iter()
            .map(|&i| formation_coordinate(&prep.offsets, i, row[i].x));
        let (lo, hi) = coords.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
            (lo.min(y), hi.max(y))
        });
        dx.push(if normal.is_empty() { 0.0 } else { hi - lo });
        dv.push(
            normal
                .iter()
                .map(|&i| (row[i].v - r).abs())
                .fold(0.0, f64::max),
        );
    }
    let mut finals: Vec<f64> = normal
        .iter()
        .map(|&i| formation_coordinate(&prep.offsets, i, trace.last()[i].x))
        .collect();
    let convergence = if scenario.horizon == 0 {
        Convergence::NoVerdict
    } else {
        match detect_convergence(&dx, &dv, scenario.epsilon) {
            Some(step) => Convergence::Converged { step },
            None => Convergence::NotConverged,
        }
    };
    let groups = count_groups(&mut finals, 10.0 * scenario.epsilon);
    let rate = tail_window(&dx).and_then(|(a, b)| {
        fit_rate(&dx[a..=b]).map(|(slope, fit)| RateFit {
            slope,
            fit,
            start: a,
            end: b,
        })
    });
    Metrics {
        dx,
        dv,
        convergence,
        groups,
        rate,
    }
}

/// First step from which both errors stay below `epsilon` through the end.
pub fn detect_convergence(dx: &[f64], dv: &[f64], epsilon: f64) -> Option<usize> {
    let mut first = None;
    for (k, (x, v)) in dx.iter().zip(dv).enumerate().rev() {
        if *x < epsilon && *v < epsilon {
            first = Some(k);
        } else {
            break;
        }
    }
    first
}

pub const LOG_FLOOR: f64 = 1e-15;

/// Least-squares slope of `ln max(dx, 1e-15)` against the step index, with its
/// coefficient of determination. `None` for fewer than two samples.
pub fn fit_rate(dx: &[f64]) -> Option<(f64, f64)> {
    if dx.len() < 2 {
        return None;
    }
    let ys: Vec<f64> = dx.iter().map(|d| d.max(LOG_FLOOR).ln()).collect();
    let m = ys.len() as f64;
    let mean_x = (m - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (k, y) in ys.iter().enumerate() {
        let dxk = k as f64 - mean_x;
        let dyk = y - mean_y;
        sxy += dxk * dyk;
        sxx += dxk * dxk;
        syy += dyk * dyk;
    }
    let slope = sxy / sxx;
    // a flat series is fitted perfectly by a flat line
    let fit = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some((slope, fit))
}

/// Level below which disagreement is dominated by round-off in the positions.
pub const ROUND_OFF_LEVEL: f64 = 1e-9;

/// Second half of the segment between the peak of `dx` and the step at which it
/// first drops under [`ROUND_OFF_LEVEL`] (or the end of the run).
pub fn tail_window(dx: &[f64]) -> Option<(usize, usize)> {
    if dx.len() < 4 {
        return None;
    }
    let peak = dx
        .iter()
        .enumerate()
        .fold(0, |best, (k, &d)| if d > dx[best] { k } else { best });
    let end = dx
        .iter()
        .enumerate()
        .skip(peak)
        .find(|(_, &d)| d < ROUND_OFF_LEVEL)
        .map_or(dx.len() - 1, |(k, _)| k);
    let start = peak + (end - peak) / 2;
    (end > start + 1).then_some((start, end))
}

/// Number of clusters when sorted values are split at gaps above `gap`.
pub fn count_groups(values: &mut [f64], gap: f64) -> usize {
    if values.is_empty() {
        return 0;
    }
    values.sort_by(f64::total_cmp);
    1 + values.windows(2).filter(|w| w[1] - w[0] > gap).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyViolation {
    pub k: usize,
    pub lower: f64,
    pub upper: f64,
    pub previous_lower: f64,
    pub previous_upper: f64,
}

/// Steps at which the envelope of normal formation coordinates in the moving
/// frame, taken over the last `tau + 1` steps, grows beyond `tolerance`.
pub fn safety_interval_violations(
    scenario: &Scenario,
    trace: &Trace,
    tolerance: f64,
) -> Result<Vec<SafetyViolation>, ScenarioError> {
    let prep = scenario.prepare()?;
    let params = prep.params;
    let normal: Vec<NodeId> = prep.normal().collect();
    let tau = scenario.delays.tau as usize;
    let step_range = |k: usize| -> (f64, f64) {
        normal
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let p = trace.rows[k][i].x - params.reference_position(k as i64);
                let y = formation_coordinate(&prep.offsets, i, p);
                (lo.min(y), hi.max(y))
            })
    };
    let ranges: Vec<(f64, f64)> = (0..trace.len()).map(step_range).collect();
    let envelope = |k: usize| {
        ranges[k.saturating_sub(tau)..=k]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(a, b)| {
                (lo.min(a), hi.max(b))
            })
    };
    let mut violations = Vec::new();
    let mut previous = envelope(0);
    for k in 1..trace.len() {
        let current = envelope(k);
        if current.0 < previous.0 - tolerance || current.1 > previous.1 + tolerance {
            violations.push(SafetyViolation {
                k,
                lower: current.0,
                upper: current.1,
                previous_lower: previous.0,
                previous_upper: previous.1,
            });
        }
        previous = current;
    }
    Ok(violations)
}

/// Parameters of the partition configuration used against a non-robust graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NecessityParams {
    pub low: f64,
    pub high: f64,
    pub middle: f64,
    pub horizon: usize,
}

impl Default for NecessityParams {
    fn default() -> Self {
        Self {
            low: 0.0,
            high: 10.0,
            middle: 5.0,
            horizon: 2000,
        }
    }
}

/// Builds the configuration that defeats a graph that is not
/// `(f+1, f+1)`-robust: `p = low` on `first`, `p = high` on `second`,
/// `middle` elsewhere, all at the reference velocity. The nodes of each set
/// with `f + 1` or more outside in-neighbors are made malicious and hold still.
pub fn theorem1_necessity_scenario(
    graph: &DirectedGraph,
    first: &[NodeId],
    second: &[NodeId],
    f: usize,
    params: NecessityParams,
) -> Result<Scenario, EngineError> {
    let n = graph.node_count();
    if f + 1 >= n {
        return Err(EngineError::Witness(format!(
            "f + 1 = {} must be below n = {n}",
            f + 1
        )));
    }
    if !violates_definition(graph, f + 1, f + 1, first, second) {
        return Err(EngineError::Witness(format!(
            "sets {first:?} and {second:?} do not violate ({0}, {0})-robustness",
            f + 1
        )));
    }
    let reached = |set: &[NodeId]| -> Vec<NodeId> {
        set.iter()
            .copied()
            .filter(|&i| {
                graph
                    .in_neighbors(i)
                    .iter()
                    .filter(|j| !set.contains(j))
                    .count()
                    > f
            })
            .collect()
    };
    let malicious: BTreeSet<NodeId> = reached(first).into_iter().chain(reached(second)).collect();
    let r = 100.0;
    let initial_x = (0..n)
        .map(|i| {
            if first.contains(&i) {
                params.low
            } else if second.contains(&i) {
                params.high
            } else {
                params.middle
            }
        })
        .collect();
    Ok(Scenario {
        name: "necessity".into(),
        n,
        f,
        sample_period: 0.01,
        target_velocity: r,
        horizon: params.horizon,
        epsilon: 0.1,
        seed: 0,
        malicious_model: Default::default(),
        omissive: false,
        alpha: vec![10.0; n],
        initial_x,
        initial_v: vec![r; n],
        active_sensing: Vec::new(),
        graph: GraphSpec::from_graph(graph),
        offsets: None,
        weights: Vec::new(),
        updates: Vec::new(),
        delays: DelaySchedule::zero(),
        malicious: malicious.into_iter().map(AttackScript::new).collect(),
    })
}

/// Witness sets from the certifier when `graph` is not `(f+1, f+1)`-robust.
pub fn necessity_witness(graph: &DirectedGraph, f: usize) -> Result<Option<Witness>, EngineError> {
    Ok(match is_rs_robust(graph, f + 1, f + 1)? {
        Verdict::Certified => None,
        Verdict::Refuted(w) => Some(w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_disagreement_has_flat_fit() {
        let dx = vec![5.0; 50];
        let (slope, _) = fit_rate(&dx).unwrap();
        assert!(slope.abs() < 1e-12);
        assert_eq!(detect_convergence(&dx, &vec![0.0; 50], 0.1), None);
    }

    #[test]
    fn exact_exponential_fit() {
        let dx: Vec<f64> = (0..200).map(|k| (-0.1 * k as f64).exp()).collect();
        let (slope, fit) = fit_rate(&dx).unwrap();
        assert!((slope + 0.1).abs() < 1e-6);
        assert!((fit - 1.0).abs() < 1e-9);
    }

    #[test]
    fn floor_applies_at_zero() {
        let (slope, _) = fit_rate(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(slope, 0.0);
    }

    #[test]
    fn convergence_must_be_sustained() {
        let dx = [1.0, 0.01, 1.0, 0.01, 0.01];
        assert_eq!(detect_convergence(&dx, &[0.0; 5], 0.1), Some(3));
    }

    #[test]
    fn groups_split_on_gaps() {
        assert_eq!(count_groups(&mut [0.0, 0.5, 5.0, 5.2], 1.0), 2);
        assert_eq!(count_groups(&mut [3.0], 1.0), 1);
        assert_eq!(count_groups(&mut [], 1.0), 0);
    }

    #[test]
    fn tail_window_stops_at_round_off() {
        let mut dx: Vec<f64> = (0..100).map(|k| (-0.5 * k as f64).exp()).collect();
        dx.extend([1e-13; 50]);
        let (a, b) = tail_window(&dx).unwrap();
        assert!(dx[b] < ROUND_OFF_LEVEL && dx[b - 1] >= ROUND_OFF_LEVEL);
        assert_eq!(a, b / 2);
    }
}
