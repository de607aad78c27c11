//! Crawl bundle ingestion: trace events, network log, dependency edges.

pub mod bundle;
pub mod network;
pub mod trace;

pub use bundle::{
    parse_deps, validate_bundle, Bundle, BundleMeta, BundleSummary, CrawlMode, DepEdge,
    InitiatorKind, DEPS_FILE, META_FILE, NETWORK_FILE, TRACE_FILE,
};
pub use network::{parse_network_log, ContentType, NetworkRequest};
pub use trace::{parse_trace, write_trace, ParsedTrace, Phase, TraceEvent};
