use std::fmt::Write as _;
use std::str::FromStr;

use super::DomainGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Json,
}

impl FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dot" => Ok(GraphFormat::Dot),
            "json" | "structured" => Ok(GraphFormat::Json),
            other => Err(format!(
                "unknown graph format {other:?} (expected dot or json)"
            )),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders a collapsed graph. Ad domains are filled red, others blue.
pub fn export_graph(graph: &DomainGraph, format: GraphFormat) -> Vec<u8> {
    match format {
        GraphFormat::Json => {
            let mut out = serde_json::to_vec_pretty(graph).expect("domain graph serializes");
            out.push(b'\n');
            out
        }
        GraphFormat::Dot => {
            let mut out = String::from("digraph resources {\n  rankdir=TB;\n  node [shape=ellipse, style=filled, fontcolor=white];\n");
            for (i, n) in graph.nodes.iter().enumerate() {
                let color = if n.is_ad_domain { "red" } else { "blue" };
                let _ = writeln!(
                    out,
                    "  n{i} [label=\"{}\\nL{} ({})\", fillcolor={color}];",
                    escape(&n.domain),
                    n.level,
                    n.member_urls.len()
                );
            }
            for e in &graph.edges {
                let _ = writeln!(
                    out,
                    "  n{} -> n{} [weight={}, label=\"{}\"];",
                    e.from, e.to, e.weight, e.weight
                );
            }
            out.push_str("}\n");
            out.into_bytes()
        }
    }
}

/// Reads back the JSON export.
pub fn import_graph(raw: &[u8]) -> Result<DomainGraph> {
    let g: DomainGraph = serde_json::from_slice(raw)?;
    for e in &g.edges {
        if e.from >= g.nodes.len() || e.to >= g.nodes.len() {
            return Err(Error::GraphImport(format!(
                "edge {}->{} out of range",
                e.from, e.to
            )));
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DomainEdge, DomainNode};
    use url::Url;

    fn two_node() -> DomainGraph {
        DomainGraph {
            nodes: vec![
                DomainNode {
                    domain: "pub.com".into(),
                    level: 0,
                    member_urls: vec![Url::parse("https://pub.com/").unwrap()],
                    is_ad_domain: false,
                },
                DomainNode {
                    domain: "doubleclick.net".into(),
                    level: 1,
                    member_urls: vec![Url::parse("https://ad.doubleclick.net/x").unwrap()],
                    is_ad_domain: true,
                },
            ],
            edges: vec![DomainEdge {
                from: 0,
                to: 1,
                weight: 1,
            }],
        }
    }

    #[test]
    fn dot_has_one_edge_and_red_ad_node() {
        let dot = String::from_utf8(export_graph(&two_node(), GraphFormat::Dot)).unwrap();
        assert_eq!(dot.matches("->").count(), 1);
        assert!(dot.contains("n1 [label=\"doubleclick.net\\nL1 (1)\", fillcolor=red];"));
        assert!(dot.contains("fillcolor=blue"));
    }

    #[test]
    fn json_round_trip() {
        let g = two_node();
        assert_eq!(
            import_graph(&export_graph(&g, GraphFormat::Json)).unwrap(),
            g
        );
    }

    #[test]
    fn import_rejects_dangling_edges() {
        let mut g = two_node();
        g.edges[0].to = 7;
        let raw = serde_json::to_vec(&g).unwrap();
        assert!(matches!(import_graph(&raw), Err(Error::GraphImport(_))));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("dot".parse::<GraphFormat>().unwrap(), GraphFormat::Dot);
        assert_eq!("json".parse::<GraphFormat>().unwrap(), GraphFormat::Json);
        assert!("svg".parse::<GraphFormat>().is_err());
    }
}
