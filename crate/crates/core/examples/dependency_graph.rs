//! Build the resource dependency tree of a bundle and print the
//! domain-collapsed graph as DOT.
//!
//! cargo run --example dependency_graph | dot -Tsvg > graph.svg

use adlens::filter::{classify_resources, RuleSet};
use adlens::graph::{
    build_graph, chain_depth_stats, collapse_by_domain, export_graph, GraphFormat,
};
use adlens::ingest::Bundle;
use std::collections::BTreeMap;

fn main() -> adlens::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| format!("{root}/fixtures/bundles/cnn_like"));
    let rules = RuleSet::load(&[format!("{root}/fixtures/filters/easylist_subset.txt")])?;
    let bundle = Bundle::load(&dir)?;

    let resources = classify_resources(&bundle.network, &rules, &bundle.meta.page_url);
    // Without a trace-derived initiator map only recorded initiators are used.
    let tree = build_graph(
        &bundle.deps,
        &resources,
        &bundle.meta.page_url,
        &BTreeMap::new(),
    );
    let depth = chain_depth_stats(&tree);
    eprintln!(
        "{} resources, {} rewritten referrers, chain depth mean {:.3} max {}",
        tree.nodes.len(),
        tree.rewritten_edges,
        depth.mean,
        depth.max
    );
    let graph = collapse_by_domain(&tree);
    for n in graph.ad_domains() {
        eprintln!("ad domain {} at level {}", n.domain, n.level);
    }
    print!(
        "{}",
        String::from_utf8_lossy(&export_graph(&graph, GraphFormat::Dot))
    );
    Ok(())
}
