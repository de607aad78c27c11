mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn adlens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adlens"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_writes_report_tables_and_timeline() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = common::bundle("listing");
    let report = tmp.path().join("report.json");
    let timeline = tmp.path().join("timeline.txt");
    let csv = tmp.path().join("csv");
    let out = adlens(&[
        "analyze",
        "--bundle",
        s(&bundle),
        "--filters",
        s(&common::filter_list()),
        "--out",
        s(&report),
        "--csv-dir",
        s(&csv),
        "--timeline",
        s(&timeline),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["kind"], "page");
    assert_eq!(v["page"]["totals"]["adSelfTime"], 839);
    let dump = std::fs::read_to_string(&timeline).unwrap();
    assert!(dump.contains("EvaluateScript [81407054..81407893] self=839 stage=Scripting resource=https://www.google-analytics.com/linkid.js"), "{dump}");
    for f in ["stages.csv", "content_types.csv", "domains.csv"] {
        assert!(csv.join(f).is_file(), "{f}");
    }
}

#[test]
fn analyze_stdout_equals_library_report() {
    let out = adlens(&[
        "analyze",
        "--bundle",
        s(&common::bundle("ground_truth")),
        "--filters",
        s(&common::filter_list()),
        "--out",
        "-",
    ]);
    let golden = std::fs::read(common::fixtures().join("golden/ground_truth.json")).unwrap();
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&golden)
    );
}

#[test]
fn wallclock_network_time_is_recorded() {
    let out = adlens(&[
        "analyze",
        "--bundle",
        s(&common::bundle("cnn_like")),
        "--filters",
        s(&common::filter_list()),
        "--network-time",
        "wallclock",
        "--out",
        "-",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["networkTime"], "wallclock");
}

#[test]
fn custom_stage_map_changes_classification() {
    let tmp = tempfile::tempdir().unwrap();
    let map = tmp.path().join("stages.txt");
    // Everything is scripting; nothing is pruned.
    std::fs::write(&map, "# test\n* -> Scripting\n").unwrap();
    let out = adlens(&[
        "analyze",
        "--bundle",
        s(&common::bundle("listing")),
        "--filters",
        s(&common::filter_list()),
        "--stage-map",
        s(&map),
        "--out",
        "-",
    ]);
    let v = stdout_json(&out);
    let rows = v["page"]["stageMetrics"]["rows"].as_array().unwrap();
    for r in rows {
        if r["stage"] != "Scripting" {
            assert_eq!(r["ctTotal"], 0, "{r}");
        }
    }
}

#[test]
fn bad_stage_map_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let map = tmp.path().join("stages.txt");
    std::fs::write(&map, "ParseHTML -> HtmlParsing\nLayout => Layout\n").unwrap();
    let out = adlens(&[
        "analyze",
        "--bundle",
        s(&common::bundle("listing")),
        "--filters",
        s(&common::filter_list()),
        "--stage-map",
        s(&map),
        "--out",
        "-",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage map line 2"));
}

#[test]
fn corpus_to_stdout_with_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = common::fixtures().join("scores");
    let out = adlens(&[
        "corpus",
        "--root",
        s(&common::fixtures().join("corpus")),
        "--filters",
        s(&common::filter_list()),
        "--wot",
        s(&scores.join("wot.csv")),
        "--vt",
        s(&scores.join("vt.csv")),
        "--out",
        "-",
        "--csv-dir",
        s(tmp.path()),
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["kind"], "corpus");
    assert_eq!(v["corpus"]["bundleCounts"]["skipped"], 1);
    // No rank file: only referrer-count popularity curves.
    let metrics: Vec<&str> = v["corpus"]["popularity"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["metric"].as_str().unwrap())
        .collect();
    assert_eq!(metrics, ["referrers", "referrers"]);
    assert!(tmp.path().join("postclick_stages.csv").is_file());
}

#[test]
fn graph_formats() {
    let bundle = common::bundle("cnn_like");
    let dot = adlens(&[
        "graph",
        "--bundle",
        s(&bundle),
        "--filters",
        s(&common::filter_list()),
        "--out",
        "-",
    ]);
    assert!(dot.status.success());
    assert_eq!(
        dot.stdout,
        std::fs::read(common::fixtures().join("golden/cnn_like.dot")).unwrap()
    );

    let json = adlens(&[
        "graph",
        "--bundle",
        s(&bundle),
        "--filters",
        s(&common::filter_list()),
        "--format",
        "json",
        "--out",
        "-",
    ]);
    let v = stdout_json(&json);
    assert_eq!(v["nodes"].as_array().unwrap().len(), 5);

    let bad = adlens(&[
        "graph",
        "--bundle",
        s(&bundle),
        "--filters",
        s(&common::filter_list()),
        "--format",
        "svg",
        "--out",
        "-",
    ]);
    assert!(!bad.status.success());
}

#[test]
fn failed_bundle_exits_nonzero() {
    let dir = common::fixtures().join("corpus/a.example/postclick/2");
    let out = adlens(&[
        "analyze",
        "--bundle",
        s(&dir),
        "--filters",
        s(&common::filter_list()),
        "--out",
        "-",
    ]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("marked failed"));
}

#[test]
fn filters_are_required() {
    let out = adlens(&[
        "analyze",
        "--bundle",
        s(&common::bundle("listing")),
        "--out",
        "-",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--filters"));
}

#[test]
fn missing_filter_file_names_the_path() {
    let out = adlens(&[
        "analyze",
        "--bundle",
        s(&common::bundle("listing")),
        "--filters",
        "/nonexistent/list.txt",
        "--out",
        "-",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/list.txt"));
}
