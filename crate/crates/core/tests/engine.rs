use std::path::PathBuf;

use platoon_core::adversary::Expr;
use platoon_core::adversary::{AttackScript, DelayRule, DelaySchedule, Silence, ValueScript};
use platoon_core::engine::{run, Convergence, EngineError};
use platoon_core::export::trace_csv;
use platoon_core::graph::GraphKind;
use platoon_core::presets;
use platoon_core::scenario::{GraphSpec, Scenario, UpdateRule};

fn plain(n: usize, f: usize, horizon: usize) -> Scenario {
    Scenario {
        name: "plain".into(),
        n,
        f,
        sample_period: 0.01,
        target_velocity: 20.0,
        horizon,
        epsilon: 0.1,
        seed: 0,
        malicious_model: Default::default(),
        omissive: false,
        alpha: vec![2.0; n],
        initial_x: (0..n).map(|i| 3.0 * i as f64).collect(),
        initial_v: (0..n).map(|i| 15.0 + i as f64).collect(),
        active_sensing: Vec::new(),
        graph: GraphSpec {
            generator: Some(GraphKind::Complete { n }),
            ..GraphSpec::default()
        },
        offsets: None,
        weights: Vec::new(),
        updates: Vec::new(),
        delays: DelaySchedule::zero(),
        malicious: Vec::new(),
    }
}

#[test]
fn zero_horizon_gives_one_row_and_no_verdict() {
    let res = run(&plain(4, 1, 0)).unwrap();
    assert_eq!(res.trace.len(), 1);
    assert_eq!(res.metrics.convergence, Convergence::NoVerdict);
    assert_eq!(res.trace.rows[0][2].x, 6.0);
}

#[test]
fn trace_has_horizon_plus_one_rows() {
    let res = run(&plain(4, 1, 37)).unwrap();
    assert_eq!(res.trace.len(), 38);
    assert_eq!(res.metrics.dx.len(), 38);
}

#[test]
fn fault_free_vehicles_agree() {
    let res = run(&plain(5, 1, 3000)).unwrap();
    assert!(matches!(
        res.metrics.convergence,
        Convergence::Converged { .. }
    ));
    assert_eq!(res.metrics.groups, 1);
    assert!(*res.metrics.dv.last().unwrap() < 1e-6);
}

#[test]
fn state_follows_the_double_integrator() {
    let res = run(&plain(5, 1, 50)).unwrap();
    let t = 0.01;
    for k in 0..50 {
        for i in 0..5 {
            let (a, b) = (&res.trace.rows[k][i], &res.trace.rows[k + 1][i]);
            assert!((b.x - (a.x + t * a.v + t * t / 2.0 * a.u)).abs() < 1e-12);
            assert!((b.v - (a.v + t * a.u)).abs() < 1e-12);
        }
    }
}

#[test]
fn retained_sets_change_only_at_updates() {
    let res = run(&presets::load("setting1_fail").unwrap()).unwrap();
    for i in [0, 1, 2, 4] {
        for k in 1..res.trace.len() {
            let (before, now) = (&res.trace.rows[k - 1][i], &res.trace.rows[k][i]);
            if before.retained != now.retained {
                assert!(
                    now.updated,
                    "vehicle {i} changed its set at {k} without updating"
                );
            }
        }
    }
    // vehicle 0 updates at phase 6 of period 12
    let steps: Vec<usize> = (0..40).filter(|&k| res.trace.rows[k][0].updated).collect();
    assert_eq!(steps, vec![6, 18, 30]);
    assert!(res.trace.rows[0].iter().all(|r| r.u.is_finite()));
    assert!(res.trace.rows[0][3].retained.is_none());
}

#[test]
fn silent_sender_beyond_tau_aborts() {
    let mut s = plain(5, 1, 40);
    s.delays = DelaySchedule::uniform(2, DelayRule::Constant(0));
    s.malicious = vec![AttackScript {
        silent: Silence::Steps((5..=20).collect()),
        ..AttackScript::new(4)
    }];
    match run(&s) {
        Err(EngineError::StaleValue {
            k,
            from,
            staleness,
            tau,
            ..
        }) => {
            assert_eq!((k, from, staleness, tau), (7, 4, 3, 2));
        }
        other => panic!("expected a staleness abort, got {other:?}"),
    }
}

#[test]
fn omissive_mode_tolerates_silence() {
    let mut s = plain(5, 1, 3000);
    s.omissive = true;
    s.delays = DelaySchedule::uniform(2, DelayRule::Constant(0));
    s.malicious = vec![AttackScript {
        silent: Silence::When(Expr::parse("parity(1, 0)").unwrap()),
        broadcast: ValueScript::Value(Expr::parse("1000 + k*T*r").unwrap()),
        ..AttackScript::new(4)
    }];
    let res = run(&s).unwrap();
    assert!(matches!(
        res.metrics.convergence,
        Convergence::Converged { .. }
    ));
}

#[test]
fn never_heard_neighbor_is_reported() {
    let mut s = plain(5, 1, 5);
    s.malicious = vec![AttackScript {
        silent: Silence::Always,
        ..AttackScript::new(4)
    }];
    assert!(matches!(
        run(&s),
        Err(EngineError::MissingValue { k: 0, from: 4, .. })
    ));
}

#[test]
fn periodic_updates_with_bounded_delays_converge() {
    let mut s = plain(5, 1, 4000);
    s.updates = (0..5)
        .map(|i| UpdateRule::periodic(i, 3, i as u64 % 3))
        .collect();
    s.delays = DelaySchedule::uniform(3, DelayRule::Cycle(vec![0, 1, 2, 3]));
    let res = run(&s).unwrap();
    assert!(matches!(
        res.metrics.convergence,
        Convergence::Converged { .. }
    ));
}

#[test]
fn repeated_runs_are_identical() {
    let s = presets::load("setting2_fail").unwrap();
    assert_eq!(run(&s).unwrap(), run(&s).unwrap());
}

#[test]
fn short_run_matches_golden_trace() {
    let mut s = presets::load("setting1_fail").unwrap();
    s.horizon = 30;
    let csv = trace_csv(&run(&s).unwrap().trace);
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/setting1_fail_30.csv");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &csv).unwrap();
    }
    let golden = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv, golden);
}
