#![allow(dead_code)]

pub mod reference;
pub mod synth;

use std::path::{Path, PathBuf};

use adlens::filter::RuleSet;
use adlens::report::{analyze_dir, AnalyzeOptions, PageAnalysis};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn bundle(name: &str) -> PathBuf {
    fixtures().join("bundles").join(name)
}

pub fn filter_list() -> PathBuf {
    fixtures().join("filters/easylist_subset.txt")
}

pub fn rules() -> RuleSet {
    RuleSet::load(&[filter_list()]).unwrap()
}

pub fn analyze(name: &str) -> PageAnalysis {
    analyze_dir(bundle(name), &rules(), &AnalyzeOptions::default()).unwrap()
}

pub const FIXTURE_BUNDLES: &[&str] = &[
    "listing",
    "summary_50",
    "ground_truth",
    "cnn_like",
    "echo_scripting",
    "echo_fraction",
];

/// Every analyzable bundle directory under the committed fixtures.
pub fn all_fixture_dirs() -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = FIXTURE_BUNDLES.iter().map(|b| bundle(b)).collect();
    dirs.extend(adlens::report::discover_bundles(&fixtures().join("corpus")).unwrap());
    dirs
}
