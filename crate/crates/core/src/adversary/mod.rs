//! Malicious-vehicle scripts, sensing semantics, delay schedules and the
//! adversary-model validators.

pub mod expr;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{counterexample_layout, DirectedGraph, NodeId};
use crate::model::VehicleState;
pub use expr::{EvalContext, Expr, ExprError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("delay {delay} on edge {from}->{to} at step {k} exceeds the bound tau = {tau}")]
    DelayOutOfBounds {
        from: NodeId,
        to: NodeId,
        k: i64,
        delay: u64,
        tau: u64,
    },
    #[error("delay rule for edge {from}->{to} is an empty cycle")]
    EmptyCycle { from: NodeId, to: NodeId },
    #[error("delay override for {from}->{to} names an edge not in the graph")]
    UnknownEdge { from: NodeId, to: NodeId },
    #[error("script value for vehicle {vehicle} toward {receiver} at step {k} is not finite")]
    NonFiniteScript {
        vehicle: NodeId,
        receiver: NodeId,
        k: i64,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Position-valued broadcast, in raw (untransformed) coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValueScript {
    /// Report the true position.
    #[default]
    Truthful,
    Value(Expr),
    Alternating {
        even: Expr,
        odd: Expr,
    },
}

impl ValueScript {
    pub fn value(&self, ctx: &EvalContext, true_x: f64) -> f64 {
        match self {
            ValueScript::Truthful => true_x,
            ValueScript::Value(e) => e.eval(ctx),
            ValueScript::Alternating { even, odd } => {
                if ctx.k.rem_euclid(2) == 0 {
                    even.eval(ctx)
                } else {
                    odd.eval(ctx)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverScript {
    pub receivers: Vec<NodeId>,
    pub script: ValueScript,
}

/// How a malicious vehicle actually moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    /// Zero input: keeps its initial velocity.
    #[default]
    Hold,
    /// Acceleration given directly as a function of `k`.
    Control(Expr),
    /// Position target: the input places the vehicle exactly on `expr(k + 1)`
    /// at the next step under the sampled dynamics.
    Trajectory(Expr),
}

impl Motion {
    pub fn input(&self, ctx: &EvalContext, state: VehicleState) -> f64 {
        match self {
            Motion::Hold => 0.0,
            Motion::Control(e) => e.eval(ctx),
            Motion::Trajectory(e) => {
                let next = EvalContext {
                    k: ctx.k + 1,
                    ..*ctx
                };
                let t = ctx.period;
                2.0 * (e.eval(&next) - state.x - t * state.v) / (t * t)
            }
        }
    }
}

/// Steps on which a malicious vehicle transmits nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Silence {
    #[default]
    Never,
    Always,
    Steps(Vec<i64>),
    /// Silent whenever the expression is nonzero.
    When(Expr),
}

impl Silence {
    pub fn is_silent(&self, ctx: &EvalContext) -> bool {
        match self {
            Silence::Never => false,
            Silence::Always => true,
            Silence::Steps(steps) => steps.contains(&ctx.k),
            Silence::When(e) => e.eval(ctx) != 0.0,
        }
    }
}

/// Full behavior of one malicious vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackScript {
    pub vehicle: NodeId,
    #[serde(default, skip_serializing_if = "is_default")]
    pub motion: Motion,
    #[serde(default, skip_serializing_if = "is_default")]
    pub broadcast: ValueScript,
    /// Receiver-specific overrides of `broadcast`; the first match wins.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_receiver: Vec<ReceiverScript>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub silent: Silence,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

impl AttackScript {
    pub fn new(vehicle: NodeId) -> Self {
        Self {
            vehicle,
            motion: Motion::Hold,
            broadcast: ValueScript::Truthful,
            per_receiver: Vec::new(),
            silent: Silence::Never,
        }
    }

    pub fn script_for(&self, receiver: NodeId) -> &ValueScript {
        self.per_receiver
            .iter()
            .find(|s| s.receivers.contains(&receiver))
            .map_or(&self.broadcast, |s| &s.script)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingMode {
    /// Trusts the transmitted value.
    Passive,
    /// Measures the neighbor's true position.
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emission {
    Value(f64),
    Silent,
}

/// Raw position observed by `receiver` for a value stamped `ctx.k`.
pub fn emitted_value(
    script: &AttackScript,
    ctx: &EvalContext,
    receiver: NodeId,
    true_x: f64,
    sensing: SensingMode,
) -> Emission {
    match sensing {
        SensingMode::Active => Emission::Value(true_x),
        SensingMode::Passive if script.silent.is_silent(ctx) => Emission::Silent,
        SensingMode::Passive => Emission::Value(script.script_for(receiver).value(ctx, true_x)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayRule {
    Constant(u64),
    Alternating { even: u64, odd: u64 },
    Cycle(Vec<u64>),
}

impl Default for DelayRule {
    fn default() -> Self {
        DelayRule::Constant(0)
    }
}

impl DelayRule {
    pub fn at(&self, k: i64) -> u64 {
        match self {
            DelayRule::Constant(d) => *d,
            DelayRule::Alternating { even, odd } => {
                if k.rem_euclid(2) == 0 {
                    *even
                } else {
                    *odd
                }
            }
            DelayRule::Cycle(list) => list[k.rem_euclid(list.len() as i64) as usize],
        }
    }

    fn max(&self) -> Option<u64> {
        match self {
            DelayRule::Constant(d) => Some(*d),
            DelayRule::Alternating { even, odd } => Some(*even.max(odd)),
            DelayRule::Cycle(list) => list.iter().copied().max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDelay {
    pub from: NodeId,
    pub to: NodeId,
    pub rule: DelayRule,
}

/// Per-edge delay `tau_ij[k]` with a common bound `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DelaySchedule {
    pub tau: u64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub default: DelayRule,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeDelay>,
}

impl DelaySchedule {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn uniform(tau: u64, rule: DelayRule) -> Self {
        Self {
            tau,
            default: rule,
            edges: Vec::new(),
        }
    }

    pub fn delay(&self, from: NodeId, to: NodeId, k: i64) -> u64 {
        self.edges
            .iter()
            .find(|e| e.from == from && e.to == to)
            .map_or(&self.default, |e| &e.rule)
            .at(k)
    }

    /// Rejects overrides on unknown edges and any delay above `tau`. All rules
    /// are periodic, so checking one period per rule covers every step.
    pub fn validate(&self, graph: &DirectedGraph) -> Result<(), AdversaryError> {
        let rules = std::iter::once((None, &self.default))
            .chain(self.edges.iter().map(|e| (Some((e.from, e.to)), &e.rule)));
        for (edge, rule) in rules {
            let (from, to) = edge.unwrap_or((0, 0));
            if let Some((from, to)) = edge {
                if !graph.has_edge(from, to) {
                    return Err(AdversaryError::UnknownEdge { from, to });
                }
            }
            let Some(max) = rule.max() else {
                return Err(AdversaryError::EmptyCycle { from, to });
            };
            if max > self.tau {
                let period = match rule {
                    DelayRule::Cycle(list) => list.len() as i64,
                    _ => 2,
                };
                let k = (0..period).find(|&k| rule.at(k) == max).unwrap_or(0);
                return Err(AdversaryError::DelayOutOfBounds {
                    from,
                    to,
                    k,
                    delay: max,
                    tau: self.tau,
                });
            }
        }
        Ok(())
    }
}

/// At most `f` malicious vehicles overall.
pub fn validate_f_total(malicious: &BTreeSet<NodeId>, f: usize) -> bool {
    malicious.len() <= f
}

/// Every normal vehicle has at most `f` malicious in-neighbors.
pub fn validate_f_local(g: &DirectedGraph, malicious: &BTreeSet<NodeId>, f: usize) -> bool {
    (0..g.node_count())
        .filter(|i| !malicious.contains(i))
        .all(|i| {
            g.in_neighbors(i)
                .iter()
                .filter(|j| malicious.contains(j))
                .count()
                <= f
        })
}

/// Scripts and delays of the partition attack on the counterexample topology.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionAttack {
    pub scripts: Vec<AttackScript>,
    pub delays: DelaySchedule,
}

/// The malicious block broadcasts `a - delta/2` (transformed) on even steps and
/// `b + delta/2` on odd steps. Delays toward the low block are 1 on odd steps,
/// toward the high block 1 on even steps, so each receiver only ever sees one
/// of the two values.
pub fn prop1_attack(
    f: usize,
    a: f64,
    b: f64,
    delta: f64,
) -> Result<PartitionAttack, AdversaryError> {
    if f == 0 {
        return Err(AdversaryError::Invalid("attack needs f >= 1".into()));
    }
    let layout = counterexample_layout(f);
    let low = a - delta / 2.0;
    let high = b + delta / 2.0;
    let parse = |s: String| Expr::parse(&s).map_err(|e| AdversaryError::Invalid(e.to_string()));
    let even = parse(format!("{low:?} + k*T*r"))?;
    let odd = parse(format!("{high:?} + k*T*r"))?;
    let scripts = layout
        .bridge
        .clone()
        .map(|j| AttackScript {
            broadcast: ValueScript::Alternating {
                even: even.clone(),
                odd: odd.clone(),
            },
            ..AttackScript::new(j)
        })
        .collect();
    let mut edges = Vec::new();
    for j in layout.bridge.clone() {
        for i in layout.low.clone() {
            edges.push(EdgeDelay {
                from: j,
                to: i,
                rule: DelayRule::Alternating { even: 0, odd: 1 },
            });
        }
        for i in layout.high.clone() {
            edges.push(EdgeDelay {
                from: j,
                to: i,
                rule: DelayRule::Alternating { even: 1, odd: 0 },
            });
        }
    }
    Ok(PartitionAttack {
        scripts,
        delays: DelaySchedule {
            tau: 1,
            default: DelayRule::Constant(0),
            edges,
        },
    })
}
