//! Analyze a directory tree of bundles and print the per-mode
//! distributions and trust curves.

use std::path::Path;

use adlens::filter::RuleSet;
use adlens::metrics::ScoreTable;
use adlens::report::{run_corpus, CorpusOptions};

fn main() -> adlens::Result<()> {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let root = std::env::args()
        .nth(1)
        .map_or_else(|| fx.join("corpus"), Into::into);
    let rules = RuleSet::load(&[fx.join("filters/easylist_subset.txt")])?;
    let mut scores = ScoreTable::default();
    scores.load_wot(&fx.join("scores/wot.csv"))?;
    scores.load_vt(&fx.join("scores/vt.csv"))?;
    scores.load_ranks(&fx.join("scores/ranks.csv"))?;
    let opts = CorpusOptions {
        scores,
        workers: Some(4),
        ..Default::default()
    };
    let report = run_corpus(&root, &rules, &opts)?;

    for p in &report.pages {
        println!(
            "{:<40} {:<9} median {:.3} over {} repeats",
            p.page_url,
            p.crawl_mode.label(),
            p.computation_fraction,
            p.bundles.len()
        );
    }
    for s in &report.skipped {
        println!("skipped {}: {}", s.bundle, s.reason);
    }
    for (mode, section) in &report.corpus.modes {
        println!("\n{} computation CDF", mode.label());
        for pt in &section.computation_cdf {
            println!("  {:.3} -> {:.3}", pt.x, pt.cumulative);
        }
    }
    for s in report.corpus.trust.iter().chain(&report.corpus.popularity) {
        let curve: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.3}:{:.2}", p.x, p.cumulative))
            .collect();
        println!("\n{} ({:?}): {}", s.metric, s.cost, curve.join(" "));
    }
    Ok(())
}
