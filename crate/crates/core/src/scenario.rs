//! Scenario description and its TOML file format.
//!
//! [`Scenario`] is both the in-memory run description and the file schema;
//! [`Scenario::prepare`] checks every invariant and resolves it into the
//! structures the engine steps over.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    validate_f_local, validate_f_total, AdversaryError, AttackScript, DelaySchedule, EvalContext,
    SensingMode,
};
use crate::graph::{generate, DirectedGraph, GraphError, GraphKind, GraphSequence, NodeId};
use crate::model::{ModelError, ModelParams};
use crate::protocol::{OffsetSpec, ProtocolError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("could not serialize scenario: {0}")]
    Serialize(String),
}

fn violated(invariant: &'static str, detail: impl Into<String>) -> ScenarioError {
    ScenarioError::Invariant {
        invariant,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaliciousModel {
    #[default]
    Total,
    Local,
    Both,
}

/// Directed edge `[from, to]`.
pub type Edge = [NodeId; 2];

/// Exactly one of `edges`, `generator` or `sequence` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<Edge>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GraphKind>,
    /// Time-varying topology: graph `k mod len` is active at step `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<Vec<Edge>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

impl GraphSpec {
    pub fn from_graph(g: &DirectedGraph) -> Self {
        Self {
            edges: Some(g.edges().map(|(j, i, _)| [j, i]).collect()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeWeight {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
}

/// Either `period` (with optional `phase`) or an explicit `steps` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateRule {
    pub vehicle: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<u64>>,
}

impl UpdateRule {
    pub fn periodic(vehicle: NodeId, period: u64, phase: u64) -> Self {
        Self {
            vehicle,
            period: Some(period),
            phase: Some(phase),
            steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateSchedule {
    EveryStep,
    Periodic { period: u64, phase: u64 },
    Steps(BTreeSet<u64>),
}

impl UpdateSchedule {
    pub fn is_update(&self, k: u64) -> bool {
        match self {
            UpdateSchedule::EveryStep => true,
            UpdateSchedule::Periodic { period, phase } => k % period == *phase,
            UpdateSchedule::Steps(steps) => steps.contains(&k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    /// Filter parameter: values trimmed per side.
    pub f: usize,
    #[serde(rename = "T")]
    pub sample_period: f64,
    #[serde(rename = "r")]
    pub target_velocity: f64,
    /// Number of steps `K`; the trace holds `K + 1` rows.
    pub horizon: usize,
    pub epsilon: f64,
    /// Recorded with the run. The engine itself draws no random numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub malicious_model: MaliciousModel,
    /// Adapt the filter to neighbors that stay silent.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub omissive: bool,
    /// Damping per vehicle; entries of malicious vehicles are unused.
    pub alpha: Vec<f64>,
    pub initial_x: Vec<f64>,
    pub initial_v: Vec<f64>,
    /// Receivers that measure neighbor positions instead of trusting broadcasts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub active_sensing: Vec<NodeId>,
    pub graph: GraphSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<OffsetSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<EdgeWeight>,
    /// Vehicles without a rule update every step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub updates: Vec<UpdateRule>,
    #[serde(default)]
    pub delays: DelaySchedule,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub malicious: Vec<AttackScript>,
}

/// A validated scenario resolved into per-step lookups.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub params: ModelParams,
    pub graphs: Vec<DirectedGraph>,
    pub window: Option<usize>,
    /// Union of all graphs, carrying the edge weights.
    pub union: DirectedGraph,
    pub offsets: OffsetSpec,
    pub updates: Vec<UpdateSchedule>,
    pub scripts: BTreeMap<NodeId, AttackScript>,
    pub sensing: Vec<SensingMode>,
}

impl Prepared {
    pub fn graph_at(&self, k: usize) -> &DirectedGraph {
        &self.graphs[k % self.graphs.len()]
    }

    pub fn is_time_varying(&self) -> bool {
        self.window.is_some()
    }

    pub fn is_malicious(&self, i: NodeId) -> bool {
        self.scripts.contains_key(&i)
    }

    pub fn normal(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.union.node_count()).filter(|i| !self.scripts.contains_key(i))
    }

    pub fn malicious_set(&self) -> BTreeSet<NodeId> {
        self.scripts.keys().copied().collect()
    }
}

fn build_graph(n: usize, edges: &[Edge]) -> Result<DirectedGraph, GraphError> {
    DirectedGraph::from_edges(n, edges.iter().map(|&[j, i]| (j, i)))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|span| line_column(text, span.start))
                .unwrap_or((0, 0));
            ScenarioError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        scenario.prepare()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| ScenarioError::Serialize(e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams, ModelError> {
        ModelParams::new(self.sample_period, self.target_velocity)
    }

    pub fn malicious_set(&self) -> BTreeSet<NodeId> {
        self.malicious.iter().map(|s| s.vehicle).collect()
    }

    /// Validates every invariant and resolves graphs, schedules and scripts.
    pub fn prepare(&self) -> Result<Prepared, ScenarioError> {
        let n = self.n;
        if n < 2 {
            return Err(violated(
                "vehicle count",
                format!("n = {n}, need at least 2"),
            ));
        }
        for (field, len) in [
            ("alpha", self.alpha.len()),
            ("initial_x", self.initial_x.len()),
            ("initial_v", self.initial_v.len()),
        ] {
            if len != n {
                return Err(violated(
                    "per-vehicle lengths",
                    format!("`{field}` has {len} entries, expected {n}"),
                ));
            }
        }
        let params = self.params()?;
        if !self.target_velocity.is_finite() {
            return Err(violated("finite parameters", "r is not finite"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(violated("finite parameters", "epsilon must be positive"));
        }
        if let Some(i) =
            (0..n).find(|&i| !(self.initial_x[i].is_finite() && self.initial_v[i].is_finite()))
        {
            return Err(violated(
                "finite parameters",
                format!("initial state of vehicle {i}"),
            ));
        }

        let (graphs, window) = self.resolve_graphs()?;
        let mut union = graphs[0].clone();
        for g in &graphs[1..] {
            union = union.union(g)?;
        }
        for w in &self.weights {
            if !union.has_edge(w.from, w.to) {
                return Err(violated(
                    "weights on existing edges",
                    format!("{}->{} is not an edge", w.from, w.to),
                ));
            }
            union.add_weighted_edge(w.from, w.to, w.weight)?;
        }
        if let Some(window) = window {
            if window as u64 > self.delays.tau {
                return Err(violated(
                    "window within delay bound",
                    format!("window {window} exceeds tau = {}", self.delays.tau),
                ));
            }
        }
        self.delays.validate(&union)?;

        let offsets = self.offsets.clone().unwrap_or_else(|| OffsetSpec::zero(n));
        offsets.validate(n)?;

        let mut scripts = BTreeMap::new();
        for s in &self.malicious {
            if s.vehicle >= n {
                return Err(violated(
                    "vehicle ids in range",
                    format!("malicious vehicle {}", s.vehicle),
                ));
            }
            if scripts.insert(s.vehicle, s.clone()).is_some() {
                return Err(violated(
                    "one script per vehicle",
                    format!("vehicle {}", s.vehicle),
                ));
            }
            if let Some(&r) = s
                .per_receiver
                .iter()
                .flat_map(|p| &p.receivers)
                .find(|&&r| r >= n)
            {
                return Err(violated("vehicle ids in range", format!("receiver {r}")));
            }
        }
        let malicious: BTreeSet<NodeId> = scripts.keys().copied().collect();
        let total_ok = validate_f_total(&malicious, self.f);
        let local_ok = validate_f_local(&union, &malicious, self.f);
        let model_ok = match self.malicious_model {
            MaliciousModel::Total => total_ok,
            MaliciousModel::Local => local_ok,
            MaliciousModel::Both => total_ok && local_ok,
        };
        if !model_ok {
            return Err(violated(
                "malicious model",
                format!(
                    "{} malicious vehicles {:?} break the f = {} {:?} bound",
                    malicious.len(),
                    malicious,
                    self.f,
                    self.malicious_model
                ),
            ));
        }
        if let Some(i) = (0..n).find(|&i| {
            !malicious.contains(&i) && !(self.alpha[i].is_finite() && self.alpha[i] > 0.0)
        }) {
            return Err(violated(
                "positive damping",
                format!("alpha[{i}] = {}", self.alpha[i]),
            ));
        }

        let mut updates = vec![UpdateSchedule::EveryStep; n];
        let mut seen = BTreeSet::new();
        for rule in &self.updates {
            if rule.vehicle >= n || !seen.insert(rule.vehicle) {
                return Err(violated(
                    "one update rule per vehicle",
                    format!("vehicle {} out of range or repeated", rule.vehicle),
                ));
            }
            updates[rule.vehicle] = match (rule.period, rule.phase, &rule.steps) {
                (Some(period), phase, None) if period >= 1 && phase.unwrap_or(0) < period => {
                    UpdateSchedule::Periodic {
                        period,
                        phase: phase.unwrap_or(0),
                    }
                }
                (None, None, Some(steps)) => UpdateSchedule::Steps(steps.iter().copied().collect()),
                _ => {
                    return Err(violated(
                        "update schedule",
                        format!(
                            "vehicle {}: give `period` >= 1 with `phase` < period, or `steps`",
                            rule.vehicle
                        ),
                    ))
                }
            };
        }

        let mut sensing = vec![SensingMode::Passive; n];
        for &i in &self.active_sensing {
            if i >= n {
                return Err(violated(
                    "vehicle ids in range",
                    format!("active receiver {i}"),
                ));
            }
            sensing[i] = SensingMode::Active;
        }

        // scripted broadcasts must stay finite over every stamp the run can use
        let tau = self.delays.tau as i64;
        for (&j, script) in &scripts {
            for k in -tau..=self.horizon as i64 {
                let ctx = EvalContext {
                    k,
                    period: self.sample_period,
                    target_velocity: self.target_velocity,
                };
                for i in union.out_neighbors(j) {
                    if !script.script_for(i).value(&ctx, 0.0).is_finite() {
                        return Err(AdversaryError::NonFiniteScript {
                            vehicle: j,
                            receiver: i,
                            k,
                        }
                        .into());
                    }
                }
            }
        }

        Ok(Prepared {
            params,
            graphs,
            window,
            union,
            offsets,
            updates,
            scripts,
            sensing,
        })
    }

    fn resolve_graphs(&self) -> Result<(Vec<DirectedGraph>, Option<usize>), ScenarioError> {
        let spec = &self.graph;
        let given = [
            spec.edges.is_some(),
            spec.generator.is_some(),
            spec.sequence.is_some(),
        ];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err(violated(
                "single graph source",
                "give exactly one of `edges`, `generator`, `sequence`",
            ));
        }
        if spec.window.is_some() && spec.sequence.is_none() {
            return Err(violated(
                "single graph source",
                "`window` requires `sequence`",
            ));
        }
        if let Some(edges) = &spec.edges {
            return Ok((vec![build_graph(self.n, edges)?], None));
        }
        if let Some(kind) = &spec.generator {
            let g = generate(kind)?;
            if g.node_count() != self.n {
                return Err(GraphError::NodeCountMismatch {
                    expected: self.n,
                    found: g.node_count(),
                }
                .into());
            }
            return Ok((vec![g], None));
        }
        let list = spec.sequence.as_ref().expect("checked above");
        let graphs = list
            .iter()
            .map(|edges| build_graph(self.n, edges))
            .collect::<Result<Vec<_>, _>>()?;
        let window = spec.window.unwrap_or(1);
        // validates non-emptiness and the window
        GraphSequence::new(graphs.clone(), window)?;
        Ok((graphs, Some(window)))
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}
