//! Parse a trace and list the activities it yields.
//!
//! cargo run --example read_trace [path/to/trace.json]

use adlens::ingest::parse_trace;
use adlens::stages::{extract_activities, StageMap};

fn main() -> adlens::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/fixtures/bundles/listing/trace.json"
        )
        .into()
    });
    let raw = std::fs::read(&path).map_err(|e| adlens::Error::io(&path, e))?;
    let parsed = parse_trace(&raw)?;
    println!(
        "{} events, {} begin/end pairs fused",
        parsed.events.len(),
        parsed.fused_pairs
    );

    let ex = extract_activities(&parsed.events, &StageMap::default());
    println!(
        "{} activities, {} markers, {} pruned",
        ex.activities.len(),
        ex.markers.len(),
        ex.pruned
    );
    for a in &ex.activities {
        let url = a.resource_hint.as_ref().map_or("-", |u| u.as_str());
        println!(
            "  {:>6} {:<12} {:<20} {:>10} +{:<6} {url}",
            a.tid,
            a.stage,
            a.name,
            a.start,
            a.end - a.start
        );
    }
    for (code, n) in parsed.warnings.iter() {
        println!("warning {code}: {n}");
    }
    Ok(())
}
