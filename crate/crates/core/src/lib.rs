//! Offline analysis of recorded page loads: which resources caused the
//! main-thread work and network traffic, and how much of it is ads.
//!
//! A crawl bundle (trace, network log, dependency edges, metadata) goes
//! through these steps:
//!
//! - [`ingest`] parses the three data files and fuses begin/end pairs.
//! - [`stages`] maps event names to rendering stages and splits out markers.
//! - [`attribution`] rebuilds call stacks and assigns each activity a resource.
//! - [`filter`] classifies resources against Adblock Plus style lists.
//! - [`graph`] builds the dependency tree and collapses it by domain.
//! - [`metrics`] computes cost fractions, stage and content-type ratios,
//!   per-domain costs and trust or popularity curves.
//! - [`report`] ties it together for one bundle or a whole corpus.
//!
//! Runnable examples live in `examples/`:
//!
//! | example | shows |
//! |---|---|
//! | `read_trace` | parsing a trace and listing activities |
//! | `attribute_activities` | call stacks and the per-thread attribution timeline |
//! | `match_filters` | URL classification with rule and exception details |
//! | `dependency_graph` | the domain graph as DOT |
//! | `page_report` | fractions and ratio tables for one page |
//! | `corpus_summary` | medians, CDFs and trust curves over a corpus |
//!
//! ```no_run
//! use adlens::filter::RuleSet;
//! use adlens::report::{analyze_dir, AnalyzeOptions};
//!
//! let rules = RuleSet::load(&["easylist.txt"])?;
//! let page = analyze_dir("bundles/0001", &rules, &AnalyzeOptions::default())?;
//! println!("{:.3} of main-thread time went to ads", page.report.computation_fraction);
//! # Ok::<(), adlens::Error>(())
//! ```

pub mod attribution;
pub mod domain;
pub mod error;
pub mod filter;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod stages;
pub mod warnings;

pub use error::{Error, Result};
