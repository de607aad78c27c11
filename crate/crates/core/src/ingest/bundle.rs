//! On-disk crawl bundle: `trace.json`, `network.jsonl`, `deps.jsonl`,
//! `meta.json`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use url::Url;

use super::network::{parse_network_log, NetworkRequest};
use super::trace::{parse_trace, Phase, TraceEvent};
use crate::domain::parse_absolute;
use crate::error::{Error, Result};
use crate::warnings::{self, Warnings};

pub const TRACE_FILE: &str = "trace.json";
pub const NETWORK_FILE: &str = "network.jsonl";
pub const DEPS_FILE: &str = "deps.jsonl";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitiatorKind {
    Parser,
    Script,
    Redirect,
    Other,
}

/// One child-parent request relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DepEdge {
    pub child_url: Url,
    pub parent_url: Url,
    pub initiator_kind: InitiatorKind,
    /// Script that issued the request, when the recorder knows it. Used to
    /// correct first-party referrers on third-party AJAX requests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initiator_url: Option<Url>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrawlMode {
    Landing,
    Postclick,
}

impl CrawlMode {
    pub fn label(self) -> &'static str {
        match self {
            CrawlMode::Landing => "landing",
            CrawlMode::Postclick => "postclick",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BundleMeta {
    pub page_url: Url,
    pub crawl_mode: CrawlMode,
    #[serde(default)]
    pub repeat_index: u32,
    /// Set by the recorder when navigation failed; such bundles are skipped.
    #[serde(default)]
    pub failed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedDeps {
    pub edges: Vec<DepEdge>,
    pub warnings: Warnings,
}

/// Parses `deps.jsonl`. Malformed lines and self edges are skipped and counted.
pub fn parse_deps(raw: &[u8]) -> ParsedDeps {
    #[derive(Deserialize)]
    #[serde(rename_all = "camelCase")]
    struct RawEdge {
        child_url: String,
        parent_url: String,
        #[serde(default = "other_kind")]
        initiator_kind: InitiatorKind,
        #[serde(default)]
        initiator_url: Option<String>,
    }
    fn other_kind() -> InitiatorKind {
        InitiatorKind::Other
    }

    let mut out = ParsedDeps::default();
    for line in String::from_utf8_lossy(raw).lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawEdge>(line).ok().and_then(|r| {
            Some(DepEdge {
                child_url: parse_absolute(&r.child_url)?,
                parent_url: parse_absolute(&r.parent_url)?,
                initiator_kind: r.initiator_kind,
                initiator_url: r.initiator_url.as_deref().and_then(parse_absolute),
            })
        });
        match parsed {
            Some(edge) if edge.child_url == edge.parent_url => {
                out.warnings.bump(warnings::DEPS_SELF_EDGE)
            }
            Some(edge) => out.edges.push(edge),
            None => out.warnings.bump(warnings::DEPS_MALFORMED_LINE),
        }
    }
    out
}

/// A fully parsed bundle.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub meta: BundleMeta,
    pub trace: Vec<TraceEvent>,
    pub network: Vec<NetworkRequest>,
    pub deps: Vec<DepEdge>,
    pub warnings: Warnings,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

impl Bundle {
    /// Reads and parses all four bundle files. The three data files are
    /// parsed concurrently.
    pub fn load(dir: impl AsRef<Path>) -> Result<Bundle> {
        let dir = dir.as_ref();
        let meta_raw = read(&dir.join(META_FILE))?;
        let meta: BundleMeta =
            serde_json::from_slice(&meta_raw).map_err(|e| Error::Meta(e.to_string()))?;
        let trace_raw = read(&dir.join(TRACE_FILE))?;
        let net_raw = read(&dir.join(NETWORK_FILE))?;
        // deps.jsonl may legitimately be absent for pages with no subresources.
        let deps_raw = match fs::read(dir.join(DEPS_FILE)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(Error::io(dir.join(DEPS_FILE), e)),
        };

        let (trace, (net, deps)) = rayon::join(
            || parse_trace(&trace_raw),
            || rayon::join(|| parse_network_log(&net_raw), || parse_deps(&deps_raw)),
        );
        let trace = trace?;
        let mut warnings = trace.warnings;
        warnings.merge(&net.warnings);
        warnings.merge(&deps.warnings);
        Ok(Bundle {
            dir: dir.to_path_buf(),
            meta,
            trace: trace.events,
            network: net.requests,
            deps: deps.edges,
            warnings,
        })
    }

    pub fn validate(&self) -> Result<BundleSummary> {
        validate_bundle(&self.trace, &self.network, &self.deps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BundleSummary {
    pub events: usize,
    pub requests: usize,
    pub edges: usize,
    /// Trace time range and network time range intersect.
    pub clocks_overlap: bool,
    /// Edges whose child URL is absent from the network log.
    pub orphan_edges: Vec<DepEdge>,
    pub warnings: Warnings,
}

/// Cross-checks the three parsed inputs.
pub fn validate_bundle(
    trace: &[TraceEvent],
    net: &[NetworkRequest],
    deps: &[DepEdge],
) -> Result<BundleSummary> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if net.is_empty() {
        return Err(Error::EmptyNetworkLog);
    }

    // Metadata records carry placeholder timestamps; leave them out of the range.
    let timed = trace.iter().filter(|e| e.ph != Phase::Metadata);
    let trace_range = timed.fold(None, |acc: Option<(u64, u64)>, e| {
        Some(match acc {
            None => (e.ts, e.end()),
            Some((lo, hi)) => (lo.min(e.ts), hi.max(e.end())),
        })
    });
    let net_lo = net.iter().map(|r| r.start_time).min().unwrap_or(0);
    let net_hi = net.iter().map(|r| r.end_time).max().unwrap_or(0);
    let clocks_overlap = match trace_range {
        Some((lo, hi)) => lo <= net_hi && net_lo <= hi,
        None => false,
    };

    let known: BTreeSet<&Url> = net.iter().map(|r| &r.url).collect();
    let orphan_edges: Vec<DepEdge> = deps
        .iter()
        .filter(|d| !known.contains(&d.child_url))
        .cloned()
        .collect();

    let mut warnings = Warnings::new();
    warnings.add(warnings::BUNDLE_ORPHAN_EDGE, orphan_edges.len() as u64);
    if !clocks_overlap {
        warnings.bump(warnings::BUNDLE_CLOCK_DISJOINT);
    }
    Ok(BundleSummary {
        events: trace.len(),
        requests: net.len(),
        edges: deps.len(),
        clocks_overlap,
        orphan_edges,
        warnings,
    })
}
