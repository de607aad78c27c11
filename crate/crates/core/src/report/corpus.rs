use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use url::Url;
use walkdir::WalkDir;

use super::{
    analyze_bundle, to_canonical_json, with_workers, AnalyzeOptions, FilterSummary, PageReport,
    SCHEMA_VERSION,
};
use crate::domain::url_domain;
use crate::error::{Error, Result};
use crate::filter::RuleSet;
use crate::ingest::{Bundle, BundleMeta, CrawlMode, META_FILE};
use crate::metrics::{
    fraction_cdf, median, popularity_cdf, trust_cdf, CdfPoint, CdfSeries, ContentTypeCounts,
    ContentTypeMetrics, CostKind, DomainCost, DomainCostAccumulator, NetworkTime, PageDomainCosts,
    ScoreTable, Scorer, StageCounts, StageMetrics,
};
use crate::warnings::{self, Warnings};

#[derive(Debug, Clone, Default)]
pub struct CorpusOptions {
    pub analyze: AnalyzeOptions,
    pub scores: ScoreTable,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedBundle {
    pub bundle: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PageSummary {
    pub page_url: Url,
    pub crawl_mode: CrawlMode,
    pub bundles: Vec<String>,
    /// Per-repeat values in bundle order.
    pub computation_fractions: Vec<f64>,
    pub network_fractions: Vec<f64>,
    /// Medians across repeats.
    pub computation_fraction: f64,
    pub network_fraction: f64,
    pub unattributed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModeSection {
    pub pages: usize,
    pub bundles: usize,
    pub computation_cdf: Vec<CdfPoint>,
    pub network_cdf: Vec<CdfPoint>,
    pub stage_metrics: StageMetrics,
    pub content_types: ContentTypeMetrics,
    pub chain_depth_mean: f64,
    pub chain_depth_max: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BundleCounts {
    pub found: usize,
    pub analyzed: usize,
    pub skipped: usize,
    pub pages: usize,
    pub skipped_pages: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusSection {
    pub modes: BTreeMap<CrawlMode, ModeSection>,
    pub domain_costs: Vec<DomainCost>,
    pub trust: Vec<CdfSeries>,
    pub popularity: Vec<CdfSeries>,
    pub bundle_counts: BundleCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusReport {
    pub schema_version: u32,
    pub kind: &'static str,
    pub network_time: NetworkTime,
    pub filters: FilterSummary,
    pub pages: Vec<PageSummary>,
    pub corpus: CorpusSection,
    pub skipped: Vec<SkippedBundle>,
    pub warnings: Warnings,
}

impl CorpusReport {
    pub fn to_json(&self) -> String {
        to_canonical_json(self).expect("report serializes")
    }
}

/// Every directory under `root` holding a bundle, in path order.
pub fn discover_bundles(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(
                path,
                e.into_io_error()
                    .unwrap_or_else(|| std::io::Error::other("directory loop")),
            )
        })?;
        if entry.file_type().is_dir() && entry.path().join(META_FILE).is_file() {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

/// The parts of a page analysis the corpus reduction needs.
struct Analyzed {
    report: PageReport,
    stage_counts: StageCounts,
    content_counts: ContentTypeCounts,
    domain_costs: PageDomainCosts,
    leaf_depths: Vec<usize>,
}

fn relative(root: &Path, dir: &Path) -> String {
    let rel = dir.strip_prefix(root).unwrap_or(dir);
    let parts: Vec<String> = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    if parts.is_empty() {
        ".".to_owned()
    } else {
        parts.join("/")
    }
}

fn read_meta(dir: &Path) -> Option<BundleMeta> {
    serde_json::from_slice(&std::fs::read(dir.join(META_FILE)).ok()?).ok()
}

/// A failed bundle keeps its metadata, when readable, to count skipped pages.
type BundleOutcome = std::result::Result<Analyzed, (Option<BundleMeta>, String)>;

#[derive(Default)]
struct ModeAcc {
    comp: Vec<f64>,
    net: Vec<f64>,
    stages: StageCounts,
    content: ContentTypeCounts,
    depths: Vec<usize>,
    bundles: usize,
}

/// Analyzes every bundle under `root` and reduces the results.
///
/// Repeats of a page are reduced to their median before building the
/// per-mode distributions. Stage, content-type and domain tables sum the raw
/// times of every analyzed bundle.
pub fn run_corpus(root: &Path, rules: &RuleSet, opts: &CorpusOptions) -> Result<CorpusReport> {
    let dirs = discover_bundles(root)?;
    let results: Vec<(String, BundleOutcome)> = with_workers(opts.workers, || {
        dirs.par_iter()
            .map(|dir| {
                let name = relative(root, dir);
                let outcome = Bundle::load(dir)
                    .and_then(|b| analyze_bundle(&b, rules, &opts.analyze))
                    .map(|a| Analyzed {
                        report: PageReport {
                            bundle: name.clone(),
                            ..a.report
                        },
                        stage_counts: a.stage_counts,
                        content_counts: a.content_counts,
                        domain_costs: a.domain_costs,
                        leaf_depths: a.tree.leaves().map(|n| n.level).collect(),
                    })
                    .map_err(|e| {
                        let reason = match e {
                            Error::FailedCrawl(_) => "marked failed by the recorder".to_owned(),
                            e => e.to_string(),
                        };
                        (read_meta(dir), reason)
                    });
                (name, outcome)
            })
            .collect()
    });

    let mut warnings = Warnings::new();
    let mut skipped = Vec::new();
    let mut attempted: BTreeSet<(Url, CrawlMode)> = BTreeSet::new();
    let mut by_page: BTreeMap<(Url, CrawlMode), Vec<Analyzed>> = BTreeMap::new();
    for (name, outcome) in results {
        match outcome {
            Ok(a) => {
                warnings.merge(&a.report.warnings);
                let key = (a.report.page_url.clone(), a.report.crawl_mode);
                attempted.insert(key.clone());
                by_page.entry(key).or_default().push(a);
            }
            Err((meta, reason)) => {
                warnings.bump(warnings::CORPUS_SKIPPED_BUNDLE);
                if let Some(m) = meta {
                    attempted.insert((m.page_url, m.crawl_mode));
                }
                skipped.push(SkippedBundle {
                    bundle: name,
                    reason,
                });
            }
        }
    }
    let skipped_pages = attempted
        .iter()
        .filter(|k| !by_page.contains_key(*k))
        .count();
    warnings.add(warnings::CORPUS_SKIPPED_PAGE, skipped_pages as u64);

    let mut pages = Vec::new();
    let mut domains = DomainCostAccumulator::default();
    let mut modes: BTreeMap<CrawlMode, ModeAcc> = BTreeMap::new();
    for ((page_url, mode), mut repeats) in by_page {
        repeats.sort_by(|a, b| {
            (a.report.repeat_index, &a.report.bundle)
                .cmp(&(b.report.repeat_index, &b.report.bundle))
        });
        let comp: Vec<f64> = repeats
            .iter()
            .map(|a| a.report.computation_fraction)
            .collect();
        let net: Vec<f64> = repeats.iter().map(|a| a.report.network_fraction).collect();
        let unattr: Vec<f64> = repeats
            .iter()
            .map(|a| a.report.unattributed_fraction)
            .collect();
        let summary = PageSummary {
            page_url: page_url.clone(),
            crawl_mode: mode,
            bundles: repeats.iter().map(|a| a.report.bundle.clone()).collect(),
            computation_fraction: median(&comp).expect("at least one repeat"),
            network_fraction: median(&net).expect("at least one repeat"),
            unattributed_fraction: median(&unattr).expect("at least one repeat"),
            computation_fractions: comp,
            network_fractions: net,
        };

        let m = modes.entry(mode).or_default();
        m.comp.push(summary.computation_fraction);
        m.net.push(summary.network_fraction);
        let site = url_domain(&page_url);
        for a in &repeats {
            m.stages += &a.stage_counts;
            m.content += &a.content_counts;
            m.depths.extend(&a.leaf_depths);
            m.bundles += 1;
            domains.add_page(&site, &a.domain_costs);
        }
        pages.push(summary);
    }

    let modes = modes
        .into_iter()
        .map(|(mode, m)| {
            let section = ModeSection {
                pages: m.comp.len(),
                bundles: m.bundles,
                computation_cdf: fraction_cdf(&m.comp),
                network_cdf: fraction_cdf(&m.net),
                stage_metrics: StageMetrics::from_counts(&m.stages),
                content_types: ContentTypeMetrics::from_counts(&m.content),
                chain_depth_mean: if m.depths.is_empty() {
                    0.0
                } else {
                    m.depths.iter().sum::<usize>() as f64 / m.depths.len() as f64
                },
                chain_depth_max: m.depths.iter().copied().max().unwrap_or(0),
            };
            (mode, section)
        })
        .collect();

    let domain_costs = domains.finish();
    let scores = &opts.scores;
    let mut trust = Vec::new();
    for (scorer, loaded) in [
        (Scorer::Wot, !scores.wot.is_empty()),
        (Scorer::VirusTotal, !scores.vt.is_empty()),
    ] {
        if !loaded {
            continue;
        }
        for cost in [CostKind::Computation, CostKind::Network] {
            let s = trust_cdf(&domain_costs, scores, scorer, cost);
            if cost == CostKind::Computation {
                warnings.add(warnings::SCORE_UNMATCHED_DOMAIN, s.unmatched.len() as u64);
            }
            trust.push(s);
        }
    }
    let mut popularity = Vec::new();
    for cost in [CostKind::Computation, CostKind::Network] {
        let (by_referrers, by_rank) = popularity_cdf(&domain_costs, scores, cost);
        popularity.push(by_referrers);
        popularity.extend(by_rank);
    }

    let analyzed: usize = pages.iter().map(|p| p.bundles.len()).sum();
    Ok(CorpusReport {
        schema_version: SCHEMA_VERSION,
        kind: "corpus",
        network_time: opts.analyze.network_time,
        filters: FilterSummary::of(rules),
        corpus: CorpusSection {
            modes,
            domain_costs,
            trust,
            popularity,
            bundle_counts: BundleCounts {
                found: dirs.len(),
                analyzed,
                skipped: skipped.len(),
                pages: pages.len(),
                skipped_pages,
            },
        },
        pages,
        skipped,
        warnings,
    })
}
