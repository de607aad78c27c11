//! End-to-end analysis of bundles and report emission.
//!
//! [`analyze_bundle`] runs one bundle through extraction, attribution,
//! classification, graph building and metrics. [`run_corpus`] does the same
//! for a directory tree of bundles and reduces the results per page and per
//! crawl mode.

mod canonical;
mod corpus;
mod csv_out;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Serialize;
use url::Url;

pub use canonical::{to_canonical_json, to_canonical_string, FLOAT_DECIMALS};
pub use corpus::{
    discover_bundles, run_corpus, CorpusOptions, CorpusReport, CorpusSection, PageSummary,
    SkippedBundle,
};
pub use csv_out::{
    write_cdf_csv, write_content_type_csv, write_corpus_csv_dir, write_domain_csv,
    write_page_csv_dir, write_stage_csv,
};

use crate::attribution::{map_resources, Attribution, AttributionPath, CallForest};
use crate::domain::url_domain;
use crate::error::{Error, Result};
use crate::filter::{classify_resources, match_url, MatchContext, ResourceRecord, RuleSet};
use crate::graph::{build_graph, chain_depth_stats, collapse_by_domain, DomainGraph, ResourceTree};
use crate::ingest::{Bundle, BundleMeta, ContentType, CrawlMode};
use crate::metrics::{
    computation_cost_fraction, network_cost_fraction, network_time, AdLookup, ContentTypeCounts,
    ContentTypeMetrics, DomainCost, DomainCostAccumulator, NetworkTime, PageDomainCosts,
    StageCounts, StageMetrics,
};
use crate::stages::{extract_activities, StageMap};
use crate::warnings::Warnings;

pub const SCHEMA_VERSION: u32 = 1;

/// JSON Schema that every report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub stage_map: StageMap,
    pub network_time: NetworkTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PageTotals {
    pub events: usize,
    pub activities: usize,
    pub pruned_events: usize,
    pub markers: usize,
    pub self_time: u64,
    pub ad_self_time: u64,
    pub unattributed_self_time: u64,
    pub requests: usize,
    pub resources: usize,
    pub ad_resources: usize,
    pub network_time: u64,
    pub ad_network_time: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphSummary {
    pub resource_nodes: usize,
    pub domain_nodes: usize,
    pub ad_domain_nodes: usize,
    pub edges: usize,
    pub rewritten_edges: usize,
    pub chain_depth_mean: f64,
    pub chain_depth_max: usize,
    pub leaves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PageReport {
    pub bundle: String,
    pub page_url: Url,
    pub crawl_mode: CrawlMode,
    pub repeat_index: u32,
    pub computation_fraction: f64,
    pub network_fraction: f64,
    pub unattributed_fraction: f64,
    pub stage_metrics: StageMetrics,
    pub content_types: ContentTypeMetrics,
    /// Self time per attribution path.
    pub attribution_paths: BTreeMap<AttributionPath, u64>,
    pub totals: PageTotals,
    pub graph: GraphSummary,
    pub domain_costs: Vec<DomainCost>,
    pub warnings: Warnings,
}

/// Everything computed for one bundle.
#[derive(Debug, Clone)]
pub struct PageAnalysis {
    pub meta: BundleMeta,
    pub forest: CallForest,
    pub attribution: Attribution,
    pub resources: Vec<ResourceRecord>,
    pub tree: ResourceTree,
    pub graph: DomainGraph,
    pub stage_counts: StageCounts,
    pub content_counts: ContentTypeCounts,
    pub domain_costs: PageDomainCosts,
    pub report: PageReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FilterSummary {
    pub sha256: String,
    pub rules: usize,
    pub warnings: Warnings,
}

impl FilterSummary {
    pub fn of(rules: &RuleSet) -> FilterSummary {
        FilterSummary {
            sha256: rules.sha256(),
            rules: rules.len(),
            warnings: rules.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub kind: &'static str,
    pub network_time: NetworkTime,
    pub filters: FilterSummary,
    pub page: PageReport,
}

impl AnalyzeReport {
    pub fn new(page: PageReport, rules: &RuleSet, opts: &AnalyzeOptions) -> AnalyzeReport {
        AnalyzeReport {
            schema_version: SCHEMA_VERSION,
            kind: "page",
            network_time: opts.network_time,
            filters: FilterSummary::of(rules),
            page,
        }
    }

    pub fn to_json(&self) -> String {
        to_canonical_json(self).expect("report serializes")
    }
}

fn bundle_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Adds records for resources seen only in the trace. They are classified
/// with an unknown content type and carry no fetch intervals.
fn add_trace_only_resources(
    resources: &mut Vec<ResourceRecord>,
    attribution: &Attribution,
    rules: &RuleSet,
    page_url: &Url,
) {
    let mut known: HashSet<Url> = resources.iter().map(|r| r.url.clone()).collect();
    for a in &attribution.attributed {
        let Some(url) = &a.resource else { continue };
        if !known.insert(url.clone()) {
            continue;
        }
        let verdict = match_url(
            &MatchContext::new(url.clone(), ContentType::Unknown, page_url),
            rules,
        );
        resources.push(ResourceRecord {
            url: url.clone(),
            domain: url_domain(url),
            content_type: ContentType::Unknown,
            is_ad: verdict.is_ad,
            matched_rule: verdict.matched_rule.filter(|_| verdict.is_ad),
            intervals: Vec::new(),
        });
    }
}

/// Runs the whole pipeline over one loaded bundle.
pub fn analyze_bundle(
    bundle: &Bundle,
    rules: &RuleSet,
    opts: &AnalyzeOptions,
) -> Result<PageAnalysis> {
    let name = bundle_name(&bundle.dir);
    if bundle.meta.failed {
        return Err(Error::FailedCrawl(bundle.dir.display().to_string()));
    }
    let summary = bundle.validate()?;
    let page_url = &bundle.meta.page_url;

    let extraction = extract_activities(&bundle.trace, &opts.stage_map);
    let (forest, attribution) = map_resources(&extraction.activities, &extraction.markers);
    let mut resources = classify_resources(&bundle.network, rules, page_url);
    add_trace_only_resources(&mut resources, &attribution, rules, page_url);

    let tree = build_graph(
        &bundle.deps,
        &resources,
        page_url,
        &attribution.request_initiators,
    );
    let graph = collapse_by_domain(&tree);
    let depth = chain_depth_stats(&tree);

    let attributed = &attribution.attributed;
    let computation_fraction = computation_cost_fraction(attributed, &resources)?;
    let network_fraction = network_cost_fraction(&resources, opts.network_time)?;
    let stage_counts = StageCounts::from_activities(attributed, &resources);
    let content_counts = ContentTypeCounts::from_resources(&resources, opts.network_time);
    let domain_costs =
        crate::metrics::page_domain_costs(attributed, &resources, &graph, opts.network_time);
    let mut acc = DomainCostAccumulator::default();
    acc.add_page(&url_domain(page_url), &domain_costs);

    let lookup = AdLookup::new(&resources);
    let self_time = attribution.total_self_time();
    let mut paths: BTreeMap<AttributionPath, u64> = BTreeMap::new();
    for a in attributed {
        *paths.entry(a.attribution_path).or_insert(0) += a.activity.self_time;
    }
    let unattributed = paths
        .get(&AttributionPath::Unattributed)
        .copied()
        .unwrap_or(0);

    let mut warnings = bundle.warnings.clone();
    warnings.merge(&summary.warnings);
    warnings.merge(&extraction.warnings);
    warnings.merge(&attribution.warnings);
    warnings.merge(&tree.warnings);

    let report = PageReport {
        bundle: name,
        page_url: page_url.clone(),
        crawl_mode: bundle.meta.crawl_mode,
        repeat_index: bundle.meta.repeat_index,
        computation_fraction,
        network_fraction,
        unattributed_fraction: unattributed as f64 / self_time as f64,
        stage_metrics: StageMetrics::from_counts(&stage_counts),
        content_types: ContentTypeMetrics::from_counts(&content_counts),
        attribution_paths: paths,
        totals: PageTotals {
            events: bundle.trace.len(),
            activities: extraction.activities.len(),
            pruned_events: extraction.pruned,
            markers: extraction.markers.len(),
            self_time,
            ad_self_time: attributed
                .iter()
                .filter(|a| lookup.is_ad(a))
                .map(|a| a.activity.self_time)
                .sum(),
            unattributed_self_time: unattributed,
            requests: bundle.network.len(),
            resources: resources.len(),
            ad_resources: resources.iter().filter(|r| r.is_ad).count(),
            network_time: network_time(&resources, opts.network_time),
            ad_network_time: network_time(resources.iter().filter(|r| r.is_ad), opts.network_time),
        },
        graph: GraphSummary {
            resource_nodes: tree.nodes.len(),
            domain_nodes: graph.nodes.len(),
            ad_domain_nodes: graph.ad_domains().count(),
            edges: graph.edges.len(),
            rewritten_edges: tree.rewritten_edges,
            chain_depth_mean: depth.mean,
            chain_depth_max: depth.max,
            leaves: depth.per_leaf_depths.len(),
        },
        domain_costs: acc.finish(),
        warnings,
    };

    Ok(PageAnalysis {
        meta: bundle.meta.clone(),
        forest,
        attribution,
        resources,
        tree,
        graph,
        stage_counts,
        content_counts,
        domain_costs,
        report,
    })
}

/// Loads and analyzes the bundle in `dir`.
pub fn analyze_dir(
    dir: impl AsRef<Path>,
    rules: &RuleSet,
    opts: &AnalyzeOptions,
) -> Result<PageAnalysis> {
    analyze_bundle(&Bundle::load(dir)?, rules, opts)
}

/// Runs `f` on a pool of `workers` threads, or on the global pool when
/// `None`.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool builds")
            .install(f),
        None => f(),
    }
}
