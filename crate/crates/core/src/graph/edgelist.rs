//! Plain-text edge lists: a `n <count>` header, then `from to [weight]` per line.
//! Blank lines and `#` comments are ignored.

use std::fmt::Write;

use super::{DirectedGraph, GraphError};

pub fn parse_edge_list(text: &str) -> Result<DirectedGraph, GraphError> {
    let mut graph: Option<DirectedGraph> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| GraphError::Parse { line, message };
        let fields: Vec<&str> = content.split_whitespace().collect();
        match graph.as_mut() {
            None => {
                let count = match fields.as_slice() {
                    ["n", count] => count
                        .parse::<usize>()
                        .map_err(|e| err(format!("bad node count `{count}`: {e}")))?,
                    _ => {
                        return Err(err(format!(
                            "expected header `n <count>`, found `{content}`"
                        )))
                    }
                };
                graph = Some(DirectedGraph::new(count).map_err(|e| err(e.to_string()))?);
            }
            Some(g) => {
                if !(2..=3).contains(&fields.len()) {
                    return Err(err(format!(
                        "expected `from to [weight]`, found `{content}`"
                    )));
                }
                let node = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|e| err(format!("bad node index `{s}`: {e}")))
                };
                let from = node(fields[0])?;
                let to = node(fields[1])?;
                let weight = match fields.get(2) {
                    Some(w) => w
                        .parse::<f64>()
                        .map_err(|e| err(format!("bad weight `{w}`: {e}")))?,
                    None => 1.0,
                };
                if g.has_edge(from, to) {
                    return Err(err(format!("duplicate edge {from} {to}")));
                }
                g.add_weighted_edge(from, to, weight)
                    .map_err(|e| err(e.to_string()))?;
            }
        }
    }
    graph.ok_or(GraphError::Parse {
        line: 0,
        message: "missing `n <count>` header".into(),
    })
}

/// Unit weights are omitted; other weights use the shortest round-trip form.
pub fn to_edge_list(g: &DirectedGraph) -> String {
    let mut out = format!("n {}\n", g.node_count());
    for (j, i, w) in g.edges() {
        if w == 1.0 {
            writeln!(out, "{j} {i}").unwrap();
        } else {
            writeln!(out, "{j} {i} {w}").unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_comments_and_weights() {
        let g = parse_edge_list("# demo\nn 3\n0 1\n1 2 2.5  # heavy\n\n").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.weight(0, 1), 1.0);
        assert_eq!(g.weight(1, 2), 2.5);
        assert_eq!(parse_edge_list(&to_edge_list(&g)).unwrap(), g);
    }

    #[test]
    fn reports_line_numbers() {
        let e = parse_edge_list("n 3\n0 1\n0 7\n").unwrap_err();
        assert!(matches!(e, GraphError::Parse { line: 3, .. }), "{e}");
        let e = parse_edge_list("0 1\n").unwrap_err();
        assert!(matches!(e, GraphError::Parse { line: 1, .. }));
        let e = parse_edge_list("n 3\n2 2\n").unwrap_err();
        assert!(e.to_string().contains("self-loop"));
        assert!(parse_edge_list("").is_err());
        assert!(parse_edge_list("n 3\n0 1\n0 1\n").is_err());
    }
}
