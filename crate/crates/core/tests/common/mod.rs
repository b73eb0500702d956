#![allow(dead_code)]

use platoon_core::graph::{
    has_spanning_tree, is_rs_robust, rooted_connectivity, DirectedGraph, NodeId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain enumeration of (r,s)-robustness: every assignment of nodes to
/// {first, second, neither}, counting outside in-neighbors edge by edge.
pub fn oracle_is_rs_robust(n: usize, edges: &[(NodeId, NodeId)], r: usize, s: usize) -> bool {
    if r == 0 {
        return true;
    }
    let mut assignment = vec![0u8; n];
    loop {
        let first: Vec<NodeId> = (0..n).filter(|&i| assignment[i] == 1).collect();
        let second: Vec<NodeId> = (0..n).filter(|&i| assignment[i] == 2).collect();
        if !first.is_empty() && !second.is_empty() {
            let reachable = |set: &[NodeId]| -> usize {
                set.iter()
                    .filter(|&&i| {
                        edges
                            .iter()
                            .filter(|&&(j, to)| to == i && !set.contains(&j))
                            .count()
                            >= r
                    })
                    .count()
            };
            let x1 = reachable(&first);
            let x2 = reachable(&second);
            if x1 != first.len() && x2 != second.len() && x1 + x2 < s {
                return false;
            }
        }
        // next base-3 assignment
        let mut pos = 0;
        loop {
            if pos == n {
                return true;
            }
            assignment[pos] += 1;
            if assignment[pos] < 3 {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

pub fn edge_list(g: &DirectedGraph) -> Vec<(NodeId, NodeId)> {
    g.edges().map(|(j, i, _)| (j, i)).collect()
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> DirectedGraph {
    let density = rng.gen_range(0.3..0.95);
    let mut g = DirectedGraph::new(n).unwrap();
    for j in 0..n {
        for i in 0..n {
            if i != j && rng.gen_bool(density) {
                g.add_edge(j, i).unwrap();
            }
        }
    }
    g
}

fn certified(g: &DirectedGraph, r: usize, s: usize) -> bool {
    is_rs_robust(g, r, s).unwrap().is_certified()
}

/// Checks the certifier against the oracle and the structural properties of robustness on `g`,
/// returning a description of every violation. `rng` drives the edge
/// removals and node additions.
pub fn robustness_property_violations(g: &DirectedGraph, rng: &mut ChaCha8Rng) -> Vec<String> {
    let n = g.node_count();
    let edges = edge_list(g);
    let mut bad = Vec::new();
    let cert = |r: usize, s: usize| certified(g, r, s);

    for r in 0..n {
        for s in 1..n {
            let got = cert(r, s);
            if got != oracle_is_rs_robust(n, &edges, r, s) {
                bad.push(format!("oracle disagrees at ({r},{s})"));
            }
            if !got {
                continue;
            }
            // monotone in both parameters
            for r2 in 0..=r {
                for s2 in 1..=s {
                    if !cert(r2, s2) {
                        bad.push(format!("monotone: ({r},{s}) but not ({r2},{s2})"));
                    }
                }
            }
            // trade one unit of r for one of s
            if r >= 1 && s + 1 < n && !cert(r - 1, s + 1) {
                bad.push(format!("trade: ({r},{s}) but not ({},{})", r - 1, s + 1));
            }
            // deleting up to w incoming edges per node
            if r >= 1 {
                let w = rng.gen_range(0..r);
                let mut thinned = g.clone();
                for i in 0..n {
                    let mut incoming = thinned.in_neighbors(i);
                    for _ in 0..w.min(incoming.len()) {
                        let j = incoming.swap_remove(rng.gen_range(0..incoming.len()));
                        thinned.remove_edge(j, i);
                    }
                }
                if !certified(&thinned, r - w, s) {
                    bad.push(format!(
                        "edge removal: ({r},{s}) minus {w} in-edges not ({},{s})",
                        r - w
                    ));
                }
            }
            // a new node hearing from at least r + s - 1 old ones
            let need = r + s - 1;
            if need <= n {
                let mut donors: Vec<NodeId> = (0..n).collect();
                let extra = rng.gen_range(need..=n);
                for k in 0..n {
                    donors.swap(k, rng.gen_range(k..n));
                }
                donors.truncate(extra);
                let bigger = g.with_added_node(donors).unwrap();
                if r < bigger.node_count() && !certified(&bigger, r, 1) {
                    bad.push(format!(
                        "node addition: ({r},{s}) plus node with {extra} in-links not {r}-robust"
                    ));
                }
            }
        }
    }

    for r in 1..n {
        if cert(r, 1) {
            // removing fewer than r nodes keeps a spanning tree
            if rooted_connectivity(g) < r {
                bad.push(format!(
                    "connectivity: {r}-robust with rooted connectivity {}",
                    rooted_connectivity(g)
                ));
            }
            // closing implication
            for s in 1..n {
                if r + 1 > s && r + 1 - s < n {
                    let r2 = r + 1 - s;
                    if !cert(r2, s) {
                        bad.push(format!("closing: {r}-robust but not ({r2},{s})"));
                    }
                }
            }
        }
    }
    if cert(1, 1) && !has_spanning_tree(g) {
        bad.push("spanning tree: 1-robust without one".into());
    }
    // upper limit on r
    let half = n.div_ceil(2);
    if half < n - 1 && cert(half + 1, 1) {
        bad.push(format!(
            "upper limit: certified r = {} above ceil(n/2)",
            half + 1
        ));
    }
    bad
}

/// Complete graphs reach every (r, s) with r <= ceil(n/2), s < n.
pub fn complete_graph_violations(n: usize) -> Vec<String> {
    let g = DirectedGraph::complete(n).unwrap();
    let mut bad = Vec::new();
    for r in 0..=n.div_ceil(2).min(n - 1) {
        for s in 1..n {
            if !certified(&g, r, s) {
                bad.push(format!("complete({n}) not ({r},{s})"));
            }
        }
    }
    bad
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random filter instances with at most `f` adversarial entries. Returns a
/// description of every retained value outside the envelope spanned by the
/// normal entries and the receiver's own relative value 0.
pub fn msr_envelope_violations(rng: &mut ChaCha8Rng, instances: usize) -> Vec<String> {
    use platoon_core::protocol::adp_msr_filter;
    let mut bad = Vec::new();
    for case in 0..instances {
        let f = rng.gen_range(0..=3);
        let m = rng.gen_range(0..=12);
        let bad_count = rng.gen_range(0..=f.min(m));
        let mut ids: Vec<NodeId> = (0..m).collect();
        for k in 0..m {
            ids.swap(k, rng.gen_range(k..m));
        }
        let adversarial = &ids[..bad_count];
        let mut normal_values = Vec::new();
        let mut values = Vec::new();
        for id in 0..m {
            let v = if rng.gen_bool(0.2) {
                rng.gen_range(-3..=3) as f64
            } else {
                rng.gen_range(-50.0..50.0)
            };
            if !adversarial.contains(&id) {
                normal_values.push(v);
                values.push((id, v));
            }
        }
        let lo = normal_values.iter().copied().fold(0.0, f64::min);
        let hi = normal_values.iter().copied().fold(0.0, f64::max);
        for &id in adversarial {
            let v = match rng.gen_range(0..4) {
                0 => rng.gen_range(-1e3..1e3),
                1 => lo,
                2 => hi,
                _ => rng.gen_range(lo - 1.0..=hi + 1.0),
            };
            values.push((id, v));
        }
        for id in adp_msr_filter(&values, f) {
            let v = values.iter().find(|e| e.0 == id).unwrap().1;
            if v < lo || v > hi {
                bad.push(format!("case {case}: f {f}, kept {v} outside [{lo}, {hi}]"));
            }
        }
    }
    bad
}
