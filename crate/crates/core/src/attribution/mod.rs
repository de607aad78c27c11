//! Resource attribution.
//!
//! Every activity is bound to the resource that initiated it, or to the
//! unattributed bucket. Parsing and evaluation work carries its resource in
//! its arguments or inherits it from the caller on the call stack. Tree
//! manipulation and rendering work is bound through invalidation markers:
//! a styling or layout pass belongs to whichever resource first scheduled
//! it, and composite/paint follow the most recent styling or layout pass.

mod stack;

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use url::Url;

pub use stack::{build_call_stacks, CallForest, StackNode};

use crate::stages::{Activity, Marker, MarkerKind, Stage};
use crate::warnings::{self, Warnings};

/// Event names of stylesheet parsing, which reads a document directly and so
/// belongs with parsing and evaluation even though its stage is Styling.
const STYLESHEET_PARSE: &[&str] = &["ParseAuthorStyleSheet", "ParseStyleSheet"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AttributionGroup {
    ParsingAndEvaluation,
    TreeManipulationAndRendering,
}

impl AttributionGroup {
    pub fn of(a: &Activity) -> AttributionGroup {
        match a.stage {
            Stage::HtmlParsing | Stage::Scripting => AttributionGroup::ParsingAndEvaluation,
            Stage::Styling if STYLESHEET_PARSE.contains(&a.name.as_str()) => {
                AttributionGroup::ParsingAndEvaluation
            }
            _ => AttributionGroup::TreeManipulationAndRendering,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AttributionPath {
    ExplicitArgs,
    AncestorInheritance,
    InvalidationInitiator,
    RenderChain,
    Unattributed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributedActivity {
    /// The activity with `self_time` filled and `end` repaired.
    pub activity: Activity,
    /// `None` is the unattributed bucket.
    pub resource: Option<Url>,
    pub attribution_path: AttributionPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum InvalidationKind {
    StyleRecalc,
    LayoutInvalidate,
}

/// Matching scope of an invalidation: its frame when known, otherwise the
/// renderer process.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Scope {
    Frame(String),
    Process(i64),
}

fn scope_of(frame: &Option<String>, pid: i64) -> Scope {
    match frame {
        Some(f) => Scope::Frame(f.clone()),
        None => Scope::Process(pid),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PendingInvalidation {
    pub kind: InvalidationKind,
    pub initiator_resource: Url,
    pub fired_at: u64,
    pub frame_id: Option<String>,
    pub pid: i64,
}

/// Invalidations fired but not yet consumed by a styling or layout pass.
/// At most one entry per kind and scope; later firings are ignored until
/// the entry is consumed.
#[derive(Debug, Clone, Default)]
pub struct InvalidationState {
    pending: BTreeMap<(InvalidationKind, Scope), PendingInvalidation>,
}

impl InvalidationState {
    /// Records a firing. Returns false if an earlier firing is still pending.
    pub fn fire(&mut self, inv: PendingInvalidation) -> bool {
        let key = (inv.kind, scope_of(&inv.frame_id, inv.pid));
        if self.pending.contains_key(&key) {
            return false;
        }
        self.pending.insert(key, inv);
        true
    }

    /// Consumes the pending entry matching an activity: same frame first,
    /// then the process-wide entry, then the earliest entry from any frame
    /// of the same process.
    pub fn consume(
        &mut self,
        kind: InvalidationKind,
        frame: &Option<String>,
        pid: i64,
    ) -> Option<PendingInvalidation> {
        if let Some(f) = frame {
            if let Some(p) = self.pending.remove(&(kind, Scope::Frame(f.clone()))) {
                return Some(p);
            }
        }
        if let Some(p) = self.pending.remove(&(kind, Scope::Process(pid))) {
            return Some(p);
        }
        let key = self
            .pending
            .iter()
            .filter(|((k, _), p)| *k == kind && p.pid == pid)
            .min_by_key(|(_, p)| p.fired_at)
            .map(|(key, _)| key.clone())?;
        self.pending.remove(&key)
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}

/// Most recent executed styling or layout pass per scope.
#[derive(Debug, Clone, Default)]
pub struct RenderHistory {
    last: HashMap<Scope, (u64, Option<Url>)>,
}

impl RenderHistory {
    pub fn record(&mut self, a: &Activity, resource: Option<Url>) {
        let mut put = |scope: Scope| {
            let slot = self
                .last
                .entry(scope)
                .or_insert((a.start, resource.clone()));
            if slot.0 <= a.start {
                *slot = (a.start, resource.clone());
            }
        };
        if let Some(f) = &a.frame_id {
            put(Scope::Frame(f.clone()));
        }
        put(Scope::Process(a.pid));
    }

    /// Latest styling/layout in the activity's frame (or process) that
    /// started no later than `a`.
    fn lookup(&self, a: &Activity) -> Option<&(u64, Option<Url>)> {
        let by_frame = a
            .frame_id
            .as_ref()
            .and_then(|f| self.last.get(&Scope::Frame(f.clone())));
        by_frame
            .or_else(|| self.last.get(&Scope::Process(a.pid)))
            .filter(|(start, _)| *start <= a.start)
    }
}

/// Resource named by the activity's own arguments.
pub fn attribute_explicit(a: &Activity) -> Option<Url> {
    a.resource_hint.clone()
}

/// Nearest ancestor with a resolved resource.
pub fn attribute_by_ancestor(
    a: &Activity,
    forest: &CallForest,
    resolved: &[Option<Url>],
) -> Option<Url> {
    forest
        .ancestors(a.id)
        .find_map(|p| resolved.get(p).cloned().flatten())
}

/// Resolves a tree-manipulation or rendering activity.
///
/// Styling and layout consume their pending invalidation; composite and
/// paint follow the last executed styling or layout. Returns `None` for the
/// path when neither applies so the caller can fall back.
pub fn attribute_rendering(
    a: &Activity,
    pending: &mut InvalidationState,
    history: &RenderHistory,
) -> Option<(Option<Url>, AttributionPath)> {
    let kind = match a.stage {
        Stage::Styling => Some(InvalidationKind::StyleRecalc),
        Stage::Layout => Some(InvalidationKind::LayoutInvalidate),
        _ => None,
    };
    match kind {
        Some(kind) => pending.consume(kind, &a.frame_id, a.pid).map(|p| {
            (
                Some(p.initiator_resource),
                AttributionPath::InvalidationInitiator,
            )
        }),
        None => history.lookup(a).map(|(_, r)| match r {
            Some(u) => (Some(u.clone()), AttributionPath::RenderChain),
            None => (None, AttributionPath::Unattributed),
        }),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Attribution {
    /// One record per activity, in activity id order.
    pub attributed: Vec<AttributedActivity>,
    /// Request URL -> resource whose execution issued it (first issuer wins).
    pub request_initiators: BTreeMap<Url, Url>,
    pub warnings: Warnings,
}

impl Attribution {
    pub fn total_self_time(&self) -> u64 {
        self.attributed.iter().map(|a| a.activity.self_time).sum()
    }
}

enum Item<'a> {
    Activity(&'a Activity),
    Marker(&'a Marker),
}

/// Attributes every activity in one sequential pass over activities and
/// markers in global time order.
///
/// At equal timestamps parsing/evaluation activities go first (so a marker
/// fired at the very start of a script sees it), then markers, then
/// rendering activities (so a marker and the pass it schedules may share a
/// timestamp).
/// `(ts, group rank, longer first, id)`.
type SortKey = (u64, u8, Reverse<u64>, usize);

pub fn attribute_all(
    activities: &[Activity],
    markers: &[Marker],
    forest: &CallForest,
) -> Attribution {
    let mut items: Vec<(SortKey, Item<'_>)> = Vec::with_capacity(activities.len() + markers.len());
    for a in activities {
        let rank = match AttributionGroup::of(a) {
            AttributionGroup::ParsingAndEvaluation => 0,
            AttributionGroup::TreeManipulationAndRendering => 2,
        };
        items.push((
            (a.start, rank, Reverse(a.duration()), a.id),
            Item::Activity(a),
        ));
    }
    for (i, m) in markers.iter().enumerate() {
        items.push(((m.ts, 1, Reverse(0), i), Item::Marker(m)));
    }
    items.sort_by_key(|(k, _)| *k);

    let mut resolved: Vec<Option<Url>> = vec![None; activities.len()];
    let mut paths = vec![AttributionPath::Unattributed; activities.len()];
    let mut pending = InvalidationState::default();
    let mut history = RenderHistory::default();
    let mut last_on_thread: HashMap<(i64, i64), usize> = HashMap::new();
    let mut request_initiators = BTreeMap::new();
    let mut warnings = forest.warnings.clone();

    for (_, item) in items {
        match item {
            Item::Activity(a) => {
                let (resource, path) =
                    resolve_activity(a, forest, &resolved, &mut pending, &history);
                if matches!(a.stage, Stage::Styling | Stage::Layout)
                    && AttributionGroup::of(a) == AttributionGroup::TreeManipulationAndRendering
                {
                    history.record(a, resource.clone());
                }
                resolved[a.id] = resource;
                paths[a.id] = path;
                last_on_thread.insert(a.thread(), a.id);
            }
            Item::Marker(m) => {
                let enclosing = last_on_thread.get(&(m.pid, m.tid)).and_then(|&last| {
                    std::iter::once(last)
                        .chain(forest.ancestors(last))
                        .filter(|&id| {
                            activities[id].start <= m.ts && m.ts <= forest.effective_end[id]
                        })
                        .find_map(|id| resolved[id].clone())
                });
                let Some(initiator) = enclosing.or_else(|| m.stack_url.clone()) else {
                    warnings.bump(warnings::MARKER_NO_INITIATOR);
                    continue;
                };
                let kind = match &m.kind {
                    MarkerKind::StyleRecalc => InvalidationKind::StyleRecalc,
                    MarkerKind::LayoutInvalidate => InvalidationKind::LayoutInvalidate,
                    MarkerKind::RequestIssued(url) => {
                        request_initiators.entry(url.clone()).or_insert(initiator);
                        continue;
                    }
                };
                pending.fire(PendingInvalidation {
                    kind,
                    initiator_resource: initiator,
                    fired_at: m.ts,
                    frame_id: m.frame_id.clone(),
                    pid: m.pid,
                });
            }
        }
    }

    let attributed = activities
        .iter()
        .map(|a| AttributedActivity {
            activity: Activity {
                end: forest.effective_end[a.id],
                self_time: forest.self_time[a.id],
                ..a.clone()
            },
            resource: resolved[a.id].clone(),
            attribution_path: paths[a.id],
        })
        .collect();
    Attribution {
        attributed,
        request_initiators,
        warnings,
    }
}

fn resolve_activity(
    a: &Activity,
    forest: &CallForest,
    resolved: &[Option<Url>],
    pending: &mut InvalidationState,
    history: &RenderHistory,
) -> (Option<Url>, AttributionPath) {
    let inherit = || match attribute_by_ancestor(a, forest, resolved) {
        Some(u) => (Some(u), AttributionPath::AncestorInheritance),
        None => (None, AttributionPath::Unattributed),
    };
    match AttributionGroup::of(a) {
        AttributionGroup::ParsingAndEvaluation => match attribute_explicit(a) {
            Some(u) => (Some(u), AttributionPath::ExplicitArgs),
            None => inherit(),
        },
        AttributionGroup::TreeManipulationAndRendering => {
            match attribute_rendering(a, pending, history) {
                Some(r) => r,
                // Browser-initiated styling/layout (e.g. the first layout) has no
                // pending invalidation and falls back to its callers.
                None if matches!(a.stage, Stage::Styling | Stage::Layout) => inherit(),
                None => (None, AttributionPath::Unattributed),
            }
        }
    }
}

/// Builds call stacks and attributes in one step.
pub fn map_resources(activities: &[Activity], markers: &[Marker]) -> (CallForest, Attribution) {
    let forest = build_call_stacks(activities);
    let attribution = attribute_all(activities, markers, &forest);
    (forest, attribution)
}

/// Text dump of each thread's call stack timeline: one line per activity,
/// indented by depth, with its resource and attribution path.
pub fn render_timeline(forest: &CallForest, attribution: &Attribution) -> String {
    let mut out = String::new();
    for (&(pid, tid), roots) in &forest.roots {
        let _ = writeln!(out, "thread pid={pid} tid={tid}");
        let mut stack: Vec<(usize, usize)> = roots.iter().rev().map(|&r| (r, 0)).collect();
        while let Some((id, depth)) = stack.pop() {
            let rec = &attribution.attributed[id];
            let a = &rec.activity;
            let resource = rec.resource.as_ref().map_or("<unattributed>", Url::as_str);
            let _ = writeln!(
                out,
                "{:indent$}{} [{}..{}] self={} stage={} resource={} path={:?}",
                "",
                a.name,
                a.start,
                a.end,
                a.self_time,
                a.stage,
                resource,
                rec.attribution_path,
                indent = depth * 2 + 2
            );
            for &c in forest.nodes[id].child_ids.iter().rev() {
                stack.push((c, depth + 1));
            }
        }
    }
    out
}
