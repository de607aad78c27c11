//! Full single-page analysis: fractions, per-stage ratios and the
//! per-content-type table.

use adlens::filter::RuleSet;
use adlens::report::{analyze_dir, AnalyzeOptions};

fn main() -> adlens::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| format!("{root}/fixtures/bundles/ground_truth"));
    let rules = RuleSet::load(&[format!("{root}/fixtures/filters/easylist_subset.txt")])?;
    let a = analyze_dir(&dir, &rules, &AnalyzeOptions::default())?;
    let r = &a.report;

    println!("{} ({})", r.page_url, r.crawl_mode.label());
    println!("computation fraction {:.6}", r.computation_fraction);
    println!("network fraction     {:.6}", r.network_fraction);
    println!("unattributed         {:.6}", r.unattributed_fraction);

    println!(
        "\n{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "stage", "ad us", "all us", "r1", "r2", "r3"
    );
    for row in &r.stage_metrics.rows {
        println!(
            "{:<12} {:>8} {:>8} {:>8.3} {:>8.3} {:>8.3}",
            row.stage, row.ct_ad, row.ct_total, row.r1.value, row.r2.value, row.r3.value
        );
    }

    println!(
        "\n{:<14} {:>6} {:>6} {:>8} {:>8}",
        "type", "ads", "all", "nt ad", "nt all"
    );
    for row in r.content_types.rows.iter().filter(|row| row.nr_total > 0) {
        println!(
            "{:<14} {:>6} {:>6} {:>8} {:>8}",
            row.content_type.label(),
            row.nr_ad,
            row.nr_total,
            row.nt_ad,
            row.nt_total
        );
    }

    println!();
    for d in &r.domain_costs {
        println!(
            "{:<24} comp {:>6} us  net {:>6} us",
            d.domain, d.computation_time, d.network_time
        );
    }
    Ok(())
}
