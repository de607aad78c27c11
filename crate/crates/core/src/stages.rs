//! Stage classification and activity extraction.
//!
//! Browser-internal events are pruned; the rest become [`Activity`] records
//! tagged with one of the six rendering-pipeline stages. Invalidation and
//! request-issue events are not work themselves and are forwarded to the
//! resource mapper as [`Marker`]s.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::domain::parse_absolute;
use crate::error::{Error, Result};
use crate::ingest::{Phase, TraceEvent};
use crate::warnings::{self, Warnings};

pub const DEFAULT_STAGE_MAP: &str = include_str!("../config/stage_map.default");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    HtmlParsing,
    Styling,
    Scripting,
    Layout,
    Composite,
    Paint,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::HtmlParsing,
        Stage::Styling,
        Stage::Scripting,
        Stage::Layout,
        Stage::Composite,
        Stage::Paint,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stage::HtmlParsing => "HtmlParsing",
            Stage::Styling => "Styling",
            Stage::Scripting => "Scripting",
            Stage::Layout => "Layout",
            Stage::Composite => "Composite",
            Stage::Paint => "Paint",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StageTarget {
    Stage(Stage),
    Pruned,
}

impl FromStr for StageTarget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "Pruned" {
            return Ok(StageTarget::Pruned);
        }
        Stage::ALL
            .iter()
            .find(|st| st.label() == s)
            .map(|st| StageTarget::Stage(*st))
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// `*` matches any run, `?` one character; everything else is literal.
fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut backtrack: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || (p[pi] != '*' && p[pi] == t[ti])) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            backtrack = Some((pi, ti));
            pi += 1;
        } else if let Some((star, matched)) = backtrack {
            pi = star + 1;
            ti = matched + 1;
            backtrack = Some((star, matched + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

/// Ordered event-name table; first matching entry wins.
#[derive(Debug, Clone)]
pub struct StageMap {
    entries: Vec<(String, StageTarget)>,
}

impl Default for StageMap {
    fn default() -> Self {
        StageMap::parse(DEFAULT_STAGE_MAP).expect("shipped stage map parses")
    }
}

impl StageMap {
    pub fn parse(text: &str) -> Result<StageMap> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::StageMap {
                line: i + 1,
                message,
            };
            let (pattern, target) = line
                .rsplit_once("->")
                .ok_or_else(|| err("expected `<pattern> -> <stage>`".into()))?;
            let pattern = pattern.trim();
            if pattern.is_empty() {
                return Err(err("empty pattern".into()));
            }
            let target = target.trim().parse::<StageTarget>().map_err(err)?;
            entries.push((pattern.to_owned(), target));
        }
        Ok(StageMap { entries })
    }

    pub fn load(path: &std::path::Path) -> Result<StageMap> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        StageMap::parse(&text)
    }

    /// `None` when no entry matches.
    pub fn lookup(&self, name: &str) -> Option<StageTarget> {
        self.entries
            .iter()
            .find(|(pattern, _)| glob_match(pattern, name))
            .map(|(_, target)| *target)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Classifies one event by name. Unknown names are pruned and counted.
pub fn classify_event(e: &TraceEvent, map: &StageMap, warnings: &mut Warnings) -> StageTarget {
    match map.lookup(&e.name) {
        Some(t) => t,
        None => {
            warnings.bump(warnings::STAGE_UNKNOWN_EVENT);
            StageTarget::Pruned
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Activity {
    pub id: usize,
    pub stage: Stage,
    pub start: u64,
    pub end: u64,
    /// Duration minus nested children; filled in by the resource mapper.
    pub self_time: u64,
    pub pid: i64,
    pub tid: i64,
    pub name: String,
    pub resource_hint: Option<Url>,
    pub frame_id: Option<String>,
}

impl Activity {
    pub fn duration(&self) -> u64 {
        self.end - self.start
    }

    pub fn thread(&self) -> (i64, i64) {
        (self.pid, self.tid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum MarkerKind {
    StyleRecalc,
    LayoutInvalidate,
    /// A network request was issued; carries the requested URL.
    RequestIssued(Url),
}

/// Point event consumed by the resource mapper rather than attributed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Marker {
    pub kind: MarkerKind,
    pub ts: u64,
    pub pid: i64,
    pub tid: i64,
    pub frame_id: Option<String>,
    /// URL of the first stack frame, if the recorder captured one.
    pub stack_url: Option<Url>,
}

fn marker_kind(e: &TraceEvent) -> Option<MarkerKind> {
    match e.name.as_str() {
        "ScheduleStyleRecalculation"
        | "StyleRecalcInvalidationTracking"
        | "ScheduleStyleInvalidationTracking" => Some(MarkerKind::StyleRecalc),
        "InvalidateLayout" | "LayoutInvalidationTracking" => Some(MarkerKind::LayoutInvalidate),
        "ResourceSendRequest" => e
            .arg_str(&["data", "url"])
            .and_then(parse_absolute)
            .map(MarkerKind::RequestIssued),
        _ => None,
    }
}

const URL_PATHS: &[&[&str]] = &[
    &["data", "url"],
    &["beginData", "url"],
    &["data", "styleSheetUrl"],
    &["data", "scriptName"],
    &["url"],
];

const FRAME_PATHS: &[&[&str]] = &[&["data", "frame"], &["beginData", "frame"], &["frame"]];

fn resource_hint(e: &TraceEvent) -> Option<Url> {
    URL_PATHS
        .iter()
        .find_map(|p| e.arg_str(p).and_then(parse_absolute))
}

fn frame_id(e: &TraceEvent) -> Option<String> {
    FRAME_PATHS
        .iter()
        .find_map(|p| e.arg_str(p))
        .filter(|f| !f.is_empty())
        .map(str::to_owned)
}

fn stack_url(e: &TraceEvent) -> Option<Url> {
    let frames = e.args.get("data")?.get("stackTrace")?.as_array()?;
    frames.iter().find_map(|f| {
        f.get("url")
            .and_then(|u| u.as_str())
            .and_then(parse_absolute)
    })
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub activities: Vec<Activity>,
    pub markers: Vec<Marker>,
    /// Events that did not become activities (markers included).
    pub pruned: usize,
    pub warnings: Warnings,
}

/// Turns fused, sorted trace events into activities and markers.
///
/// Only complete-phase events can become activities. Ids are dense and
/// follow the input order.
pub fn extract_activities(events: &[TraceEvent], map: &StageMap) -> Extraction {
    let mut out = Extraction::default();
    for e in events {
        if let Some(kind) = marker_kind(e) {
            out.markers.push(Marker {
                kind,
                ts: e.ts,
                pid: e.pid,
                tid: e.tid,
                frame_id: frame_id(e),
                stack_url: stack_url(e),
            });
            out.pruned += 1;
            continue;
        }
        if e.ph != Phase::Complete {
            out.pruned += 1;
            continue;
        }
        match classify_event(e, map, &mut out.warnings) {
            StageTarget::Pruned => out.pruned += 1,
            StageTarget::Stage(stage) => {
                let id = out.activities.len();
                out.activities.push(Activity {
                    id,
                    stage,
                    start: e.ts,
                    end: e.end(),
                    self_time: 0,
                    pid: e.pid,
                    tid: e.tid,
                    name: e.name.clone(),
                    resource_hint: resource_hint(e),
                    frame_id: frame_id(e),
                });
            }
        }
    }
    out
}
