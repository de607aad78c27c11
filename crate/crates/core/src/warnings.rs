//! Machine-readable warning counters.
//!
//! Every recoverable anomaly met while processing a bundle is recorded as a
//! `(code, count)` pair so reports can be diffed and filtered without parsing
//! free text.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const TRACE_TRUNCATED: &str = "trace.truncated";
pub const TRACE_UNMATCHED_BEGIN: &str = "trace.unmatched_begin";
pub const TRACE_UNMATCHED_END: &str = "trace.unmatched_end";
pub const TRACE_NEGATIVE_SPAN: &str = "trace.negative_span";
pub const NETWORK_MALFORMED_LINE: &str = "network.malformed_line";
pub const NETWORK_MISSING_URL: &str = "network.missing_url";
pub const NETWORK_MISSING_TIMING: &str = "network.missing_timing";
pub const NETWORK_INVALID_URL: &str = "network.invalid_url";
pub const NETWORK_NEGATIVE_SPAN: &str = "network.negative_span";
pub const DEPS_MALFORMED_LINE: &str = "deps.malformed_line";
pub const DEPS_SELF_EDGE: &str = "deps.self_edge";
pub const BUNDLE_ORPHAN_EDGE: &str = "bundle.orphan_edge";
pub const BUNDLE_CLOCK_DISJOINT: &str = "bundle.clock_disjoint";
pub const STAGE_UNKNOWN_EVENT: &str = "stage.unknown_event";
pub const STACK_TRUNCATED_OVERLAP: &str = "stack.truncated_overlap";
pub const MARKER_NO_INITIATOR: &str = "attribution.marker_without_initiator";
pub const FILTER_COSMETIC: &str = "filter.cosmetic_dropped";
pub const FILTER_REGEX: &str = "filter.regex_dropped";
pub const FILTER_UNSUPPORTED_OPTION: &str = "filter.unsupported_option_dropped";
pub const FILTER_UNPARSEABLE: &str = "filter.unparseable_dropped";
pub const GRAPH_ORPHAN: &str = "graph.orphan_attached_to_root";
pub const GRAPH_CYCLE: &str = "graph.cycle_broken";
pub const CORPUS_SKIPPED_BUNDLE: &str = "corpus.skipped_bundle";
pub const CORPUS_SKIPPED_PAGE: &str = "corpus.skipped_page";
pub const SCORE_UNMATCHED_DOMAIN: &str = "score.unmatched_domain";

/// Counter of warning codes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Warnings(BTreeMap<String, u64>);

impl Warnings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bump(&mut self, code: &str) {
        self.add(code, 1);
    }

    pub fn add(&mut self, code: &str, n: u64) {
        if n > 0 {
            *self.0.entry(code.to_owned()).or_insert(0) += n;
        }
    }

    pub fn count(&self, code: &str) -> u64 {
        self.0.get(code).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &Warnings) {
        for (code, n) in &other.0 {
            self.add(code, *n);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}
