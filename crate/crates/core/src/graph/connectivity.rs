use super::{DirectedGraph, NodeId};

fn reach(adj: &[u64], alive: u64, start: NodeId) -> u64 {
    let mut seen = 1u64 << start;
    let mut frontier = seen;
    while frontier != 0 {
        let i = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let next = adj[i] & alive & !seen;
        seen |= next;
        frontier |= next;
    }
    seen
}

/// Out-neighbor and in-neighbor masks.
fn adjacency(g: &DirectedGraph) -> (Vec<u64>, Vec<u64>) {
    let mut out = vec![0u64; g.node_count()];
    let mut inn = vec![0u64; g.node_count()];
    for (j, i, _) in g.edges() {
        out[j] |= 1u64 << i;
        inn[i] |= 1u64 << j;
    }
    (out, inn)
}

fn strongly_connected_on(out: &[u64], inn: &[u64], alive: u64) -> bool {
    if alive.count_ones() <= 1 {
        return true;
    }
    let start = alive.trailing_zeros() as usize;
    reach(out, alive, start) == alive && reach(inn, alive, start) == alive
}

fn spanning_tree_on(out: &[u64], alive: u64) -> bool {
    let mut rest = alive;
    while rest != 0 {
        let root = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        if reach(out, alive, root) == alive {
            return true;
        }
    }
    false
}

fn full_mask(n: usize) -> u64 {
    (1u64 << n) - 1
}

/// Smallest number of node removals that break `holds`; `n - 1` when none does.
fn min_removal(n: usize, holds: impl Fn(u64) -> bool) -> usize {
    let full = full_mask(n);
    for k in 0..n.saturating_sub(1) {
        // every removal set of size k
        let found = (0..=full)
            .filter(|m: &u64| m.count_ones() as usize == k)
            .any(|removed| !holds(full & !removed));
        if found {
            return k;
        }
    }
    n.saturating_sub(1)
}

pub fn is_strongly_connected(g: &DirectedGraph) -> bool {
    let (out, inn) = adjacency(g);
    strongly_connected_on(&out, &inn, full_mask(g.node_count()))
}

/// True when some node reaches every other node along directed paths.
pub fn has_spanning_tree(g: &DirectedGraph) -> bool {
    let (out, _) = adjacency(g);
    spanning_tree_on(&out, full_mask(g.node_count()))
}

/// Minimum number of nodes whose removal leaves the graph not strongly
/// connected (`n - 1` for complete graphs). Exhaustive over removal sets.
pub fn vertex_connectivity(g: &DirectedGraph) -> usize {
    let (out, inn) = adjacency(g);
    min_removal(g.node_count(), |alive| {
        strongly_connected_on(&out, &inn, alive)
    })
}

/// Minimum number of nodes whose removal leaves a graph without a directed
/// spanning tree. Coincides with [`vertex_connectivity`] on strongly connected
/// graphs and is the measure bounded below by `r` for r-robust digraphs.
pub fn rooted_connectivity(g: &DirectedGraph) -> usize {
    let (out, _) = adjacency(g);
    min_removal(g.node_count(), |alive| spanning_tree_on(&out, alive))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_four() {
        let g = DirectedGraph::complete(4).unwrap();
        assert_eq!(vertex_connectivity(&g), 3);
        assert_eq!(rooted_connectivity(&g), 3);
        assert!(has_spanning_tree(&g));
        assert!(is_strongly_connected(&g));
    }

    #[test]
    fn edgeless_three() {
        let g = DirectedGraph::new(3).unwrap();
        assert_eq!(vertex_connectivity(&g), 0);
        assert_eq!(rooted_connectivity(&g), 0);
        assert!(!has_spanning_tree(&g));
    }

    #[test]
    fn directed_path_has_root_but_is_not_strong() {
        let g = DirectedGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert!(has_spanning_tree(&g));
        assert!(!is_strongly_connected(&g));
        assert_eq!(vertex_connectivity(&g), 0);
        // dropping node 1 disconnects 0 from 2
        assert_eq!(rooted_connectivity(&g), 1);
    }

    #[test]
    fn directed_cycle() {
        let g = DirectedGraph::from_edges(4, (0..4).map(|i| (i, (i + 1) % 4))).unwrap();
        assert_eq!(vertex_connectivity(&g), 1);
        assert!(has_spanning_tree(&g));
    }
}
