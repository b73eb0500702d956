//! Bundled scenarios and the builders they were written from.

use crate::adversary::{
    prop1_attack, AdversaryError, AttackScript, DelaySchedule, Expr, Motion, ValueScript,
};
use crate::engine::{necessity_witness, theorem1_necessity_scenario, NecessityParams};
use crate::graph::{counterexample_layout, DirectedGraph, GraphKind, NodeId};
use crate::protocol::OffsetSpec;
use crate::scenario::{GraphSpec, Scenario, ScenarioError, UpdateRule};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "setting1_fail",
        summary: "five vehicles, (2,2)-robust graph that is not 3-robust, alternating lies",
        text: include_str!("../presets/setting1_fail.scn"),
    },
    Preset {
        name: "setting1_success",
        summary: "same vehicles and attack on the complete graph",
        text: include_str!("../presets/setting1_success.scn"),
    },
    Preset {
        name: "setting2_fail",
        summary: "spread-out start, two active receivers tracking the attacker's true motion",
        text: include_str!("../presets/setting2_fail.scn"),
    },
    Preset {
        name: "setting2_success",
        summary: "second setting on the complete graph",
        text: include_str!("../presets/setting2_success.scn"),
    },
    Preset {
        name: "prop1_attack_f1",
        summary: "7-node 2-robust graph split by a delay-scripted attack",
        text: include_str!("../presets/prop1_attack_f1.scn"),
    },
    Preset {
        name: "necessity_witness",
        summary: "partition configuration on a graph that is not (2,2)-robust",
        text: include_str!("../presets/necessity_witness.scn"),
    },
    Preset {
        name: "joint_success",
        summary: "two alternating graphs whose union is complete, window 2",
        text: include_str!("../presets/joint_success.scn"),
    },
    Preset {
        name: "joint_fail",
        summary: "two alternating graphs whose union is the five-node graph above, with the attack",
        text: include_str!("../presets/joint_fail.scn"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn load(name: &str) -> Result<Scenario, ScenarioError> {
    let preset = find(name).ok_or_else(|| ScenarioError::Invariant {
        invariant: "known preset",
        detail: format!("no preset named `{name}`"),
    })?;
    Scenario::from_toml(preset.text)
}

/// Edges of the five-node topology used by the failing settings: (2,2)-robust,
/// not 3-robust, and defeated by both attacks.
pub const FIVE_NODE_EDGES: &[[NodeId; 2]] = &[
    [0, 2],
    [0, 3],
    [0, 4],
    [1, 3],
    [1, 4],
    [2, 0],
    [2, 3],
    [3, 1],
    [3, 2],
    [3, 4],
    [4, 0],
    [4, 1],
    [4, 2],
    [4, 3],
];

pub const ATTACKER: NodeId = 3;

fn expr(s: &str) -> Expr {
    Expr::parse(s).expect("preset expressions are valid")
}

fn common(name: &str, graph: GraphSpec) -> Scenario {
    Scenario {
        name: name.into(),
        n: 5,
        f: 1,
        sample_period: 0.01,
        target_velocity: 100.0,
        horizon: 20_000,
        epsilon: 0.1,
        seed: 0,
        malicious_model: Default::default(),
        omissive: false,
        alpha: Vec::new(),
        initial_x: Vec::new(),
        initial_v: vec![50.0, 70.0, 70.0, 60.0, 10.0],
        active_sensing: Vec::new(),
        graph,
        offsets: None,
        weights: Vec::new(),
        updates: [(0, 6), (1, 9), (2, 11), (4, 4)]
            .into_iter()
            .map(|(i, phase)| UpdateRule::periodic(i, 12, phase))
            .collect(),
        delays: DelaySchedule::uniform(11, Default::default()),
        malicious: Vec::new(),
    }
}

fn alternating_lie() -> ValueScript {
    ValueScript::Alternating {
        even: expr("2 + k*T*r"),
        odd: expr("200"),
    }
}

/// First setting: every receiver is passive and sees the alternating lie.
pub fn setting1(name: &str, graph: GraphSpec) -> Scenario {
    Scenario {
        alpha: vec![2.0, 3.0, 3.0, 0.0, 2.0],
        initial_x: vec![4.0, 250.0, 150.0, 8.0, 0.0],
        malicious: vec![AttackScript {
            broadcast: alternating_lie(),
            ..AttackScript::new(ATTACKER)
        }],
        ..common(name, graph)
    }
}

/// Second setting: vehicles 1 and 2 measure the attacker, whose position in
/// the moving frame follows `0.1 k + 5 sqrt(k)`; vehicles 0 and 4 get the
/// alternating lie.
pub fn setting2(name: &str, graph: GraphSpec) -> Scenario {
    Scenario {
        alpha: vec![2.0, 10.0, 10.0, 0.0, 2.0],
        initial_x: vec![100.0, 400.0, 500.0, 10.0, 0.0],
        active_sensing: vec![1, 2],
        malicious: vec![AttackScript {
            motion: Motion::Trajectory(expr("0.1*k + 5*sqrt(k) + k*T*r")),
            broadcast: alternating_lie(),
            ..AttackScript::new(ATTACKER)
        }],
        ..common(name, graph)
    }
}

pub fn five_node_graph() -> GraphSpec {
    GraphSpec {
        edges: Some(FIVE_NODE_EDGES.to_vec()),
        ..GraphSpec::default()
    }
}

pub fn complete_five() -> GraphSpec {
    GraphSpec {
        generator: Some(GraphKind::Complete { n: 5 }),
        ..GraphSpec::default()
    }
}

/// The partition attack on the counterexample topology. Low-block vehicles
/// start at `a - delta/2`, high-block at `b + delta/2`, the core at the
/// midpoint; the desired gap between the two blocks is `delta`.
pub fn prop1_scenario(
    f: usize,
    a: f64,
    b: f64,
    delta: f64,
    horizon: usize,
) -> Result<Scenario, AdversaryError> {
    let attack = prop1_attack(f, a, b, delta)?;
    let layout = counterexample_layout(f);
    let n = layout.node_count();
    let r = 100.0;
    let mut eta = vec![0.0; n];
    let mut x = vec![(a + b) / 2.0; n];
    for i in layout.low.clone() {
        eta[i] = delta / 2.0;
        x[i] = a - delta / 2.0;
    }
    for i in layout.high.clone() {
        eta[i] = -delta / 2.0;
        x[i] = b + delta / 2.0;
    }
    Ok(Scenario {
        name: format!("prop1_attack_f{f}"),
        n,
        f,
        sample_period: 0.01,
        target_velocity: r,
        horizon,
        epsilon: 0.1,
        seed: 0,
        malicious_model: Default::default(),
        omissive: false,
        alpha: vec![2.0; n],
        initial_x: x,
        initial_v: vec![r; n],
        active_sensing: Vec::new(),
        graph: GraphSpec {
            generator: Some(GraphKind::Counterexample { f }),
            ..GraphSpec::default()
        },
        offsets: (delta != 0.0).then_some(OffsetSpec::Eta(eta)),
        weights: Vec::new(),
        updates: Vec::new(),
        delays: attack.delays,
        malicious: attack.scripts,
    })
}

/// Five nodes, not (2,2)-robust: node 0 hears from two outsiders, every other
/// node of `{0, 1}` and `{3, 4}` from at most one.
pub fn necessity_graph() -> DirectedGraph {
    DirectedGraph::from_edges(
        5,
        [
            (0, 1),
            (1, 0),
            (3, 4),
            (4, 3),
            (0, 2),
            (1, 2),
            (3, 2),
            (4, 2),
            (2, 0),
            (3, 0),
            (2, 1),
            (2, 3),
            (2, 4),
        ],
    )
    .expect("valid edges")
}

/// Splits a five-node edge list into two graphs: each link is active on the
/// parity of its receiver's update phase (vehicles 0 and 4 update on even
/// steps, 1 and 2 on odd ones, links into the attacker on even ones).
pub fn split_by_receiver_phase(edges: &[[NodeId; 2]]) -> Vec<Vec<[NodeId; 2]>> {
    let odd = |to: NodeId| to == 1 || to == 2;
    let (b, a): (Vec<[NodeId; 2]>, Vec<[NodeId; 2]>) = edges.iter().partition(|e| odd(e[1]));
    vec![a, b]
}

/// First setting over an alternating pair of graphs with window 2.
pub fn joint(name: &str, edges: &[[NodeId; 2]]) -> Scenario {
    let graph = GraphSpec {
        sequence: Some(split_by_receiver_phase(edges)),
        window: Some(2),
        ..GraphSpec::default()
    };
    setting1(name, graph)
}

pub fn complete_edges(n: usize) -> Vec<[NodeId; 2]> {
    (0..n)
        .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| [j, i]))
        .collect()
}

/// Partition configuration on [`necessity_graph`] using the certifier's witness.
pub fn necessity_preset() -> Scenario {
    let g = necessity_graph();
    let w = necessity_witness(&g, 1)
        .expect("certifier accepts five nodes")
        .expect("graph is not (2,2)-robust");
    let mut s = theorem1_necessity_scenario(&g, &w.first, &w.second, 1, NecessityParams::default())
        .expect("witness violates the definition");
    s.name = "necessity_witness".into();
    s
}

/// Every bundled scenario, rebuilt from code.
pub fn build_all() -> Vec<Scenario> {
    vec![
        setting1("setting1_fail", five_node_graph()),
        setting1("setting1_success", complete_five()),
        setting2("setting2_fail", five_node_graph()),
        setting2("setting2_success", complete_five()),
        prop1_scenario(1, 0.0, 1.0, 0.0, 2000).expect("f = 1 is valid"),
        necessity_preset(),
        joint("joint_success", &complete_edges(5)),
        joint("joint_fail", FIVE_NODE_EDGES),
    ]
}
