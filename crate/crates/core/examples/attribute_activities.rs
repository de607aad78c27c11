//! Reconstruct call stacks and attribute every activity to a resource.
//!
//! Prints the indented per-thread timeline with the resolved resource and
//! the rule that resolved it.

use adlens::attribution::{map_resources, render_timeline, AttributionPath};
use adlens::ingest::Bundle;
use adlens::stages::{extract_activities, StageMap};

fn main() -> adlens::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/bundles/ground_truth").into()
    });
    let bundle = Bundle::load(&dir)?;
    let ex = extract_activities(&bundle.trace, &StageMap::default());
    let (forest, attribution) = map_resources(&ex.activities, &ex.markers);
    print!("{}", render_timeline(&forest, &attribution));

    let mut by_path = std::collections::BTreeMap::<AttributionPath, u64>::new();
    for a in &attribution.attributed {
        *by_path.entry(a.attribution_path).or_default() += a.activity.self_time;
    }
    println!();
    for (path, t) in by_path {
        println!("{path:?}: {t} us");
    }
    for (request, initiator) in &attribution.request_initiators {
        println!("{request} <- {initiator}");
    }
    Ok(())
}
