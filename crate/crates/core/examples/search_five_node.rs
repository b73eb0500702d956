//! Exhaustive search over labelled five-node digraphs for a topology that is
//! (2,2)-robust, not 3-robust, and on which both bundled attacks split the
//! normal vehicles into two groups.

use platoon_core::engine::run;
use platoon_core::graph::{is_rs_robust_with, CertifierConfig, DirectedGraph};
use platoon_core::presets::{setting1, setting2};
use platoon_core::scenario::GraphSpec;

fn main() {
    let horizon: usize = std::env::args()
        .nth(1)
        .map_or(20_000, |s| s.parse().expect("horizon"));
    let pairs: Vec<(usize, usize)> = (0..5)
        .flat_map(|j| (0..5).filter(move |&i| i != j).map(move |i| (j, i)))
        .collect();
    let config = CertifierConfig::default().single_threaded();
    // optional file of previously printed lines to re-screen
    let only: Option<Vec<u32>> = std::env::args().nth(2).map(|path| {
        std::fs::read_to_string(path)
            .expect("candidate file")
            .lines()
            .map(|line| {
                let edges = line.rsplit(' ').next().unwrap();
                pairs
                    .iter()
                    .enumerate()
                    .filter(|(_, (j, i))| edges.contains(&format!("[{j},{i}]")))
                    .fold(0, |m, (b, _)| m | 1 << b)
            })
            .collect()
    });
    let masks: Box<dyn Iterator<Item = u32>> = match only {
        Some(list) => Box::new(list.into_iter()),
        None => Box::new(0u32..1 << pairs.len()),
    };
    let mut candidates = 0;
    for mask in masks {
        let edges = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &e)| e);
        let g = DirectedGraph::from_edges(5, edges).unwrap();
        if g.min_in_degree() < 2 {
            continue;
        }
        if !is_rs_robust_with(&g, 2, 2, &config).unwrap().is_certified()
            || is_rs_robust_with(&g, 3, 1, &config).unwrap().is_certified()
        {
            continue;
        }
        candidates += 1;
        let spec = GraphSpec::from_graph(&g);
        let mut results = Vec::new();
        for build in [setting1, setting2] {
            let mut s = build("search", spec.clone());
            s.horizon = horizon;
            let Ok(out) = run(&s) else { break };
            results.push(out.metrics);
        }
        if results.len() == 2 && results.iter().all(|m| m.groups == 2) {
            let gaps: Vec<String> = results
                .iter()
                .map(|m| format!("{:.3}", m.dx.last().unwrap()))
                .collect();
            let list: Vec<String> = g.edges().map(|(j, i, _)| format!("[{j},{i}]")).collect();
            println!(
                "{} edges dx={} {}",
                g.edge_count(),
                gaps.join("/"),
                list.join(",")
            );
        }
    }
    eprintln!("{candidates} candidates");
}
