//! Random, properly nested synthetic bundles. The generator tracks the self
//! time it creates per stage, giving an oracle that does not depend on the
//! analyzer's call-stack code.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};
use tempfile::TempDir;

use adlens::stages::Stage;

pub struct Synth {
    pub dir: TempDir,
    /// Self time created per stage, in `Stage::ALL` order.
    pub stage_self: [u64; 6],
    pub total: u64,
    pub activities: usize,
}

struct Gen<'r> {
    rng: &'r mut StdRng,
    events: Vec<Value>,
    stage_self: [u64; 6],
    activities: usize,
    scripts: Vec<String>,
    page: String,
}

fn stage_index(s: Stage) -> usize {
    Stage::ALL.iter().position(|&x| x == s).unwrap()
}

const RENDER: &[(&str, Stage, &str)] = &[
    ("UpdateLayoutTree", Stage::Styling, "beginData"),
    ("Layout", Stage::Layout, "beginData"),
    ("UpdateLayerTree", Stage::Composite, "data"),
    ("CompositeLayers", Stage::Composite, "data"),
    ("Paint", Stage::Paint, "data"),
    ("Decode Image", Stage::Paint, "data"),
];

const PLAIN_SCRIPT: &[&str] = &[
    "FunctionCall",
    "v8.compile",
    "v8.run",
    "RunMicrotasks",
    "TimerFire",
];

impl Gen<'_> {
    fn emit(&mut self, pid: i64, tid: i64, ts: u64, dur: u64, name: &str, args: Value) {
        if self.rng.gen_bool(0.1) {
            self.events.push(json!({"pid": pid, "tid": tid, "ts": ts, "ph": "B", "cat": "devtools.timeline", "name": name, "args": args}));
            self.events.push(json!({"pid": pid, "tid": tid, "ts": ts + dur, "ph": "E", "cat": "devtools.timeline", "name": name, "args": {}}));
        } else {
            self.events.push(json!({"pid": pid, "tid": tid, "ts": ts, "ph": "X", "dur": dur, "cat": "devtools.timeline", "name": name, "args": args}));
        }
    }

    fn marker(&mut self, pid: i64, tid: i64, ts: u64, frame: &str) {
        let name = *["ScheduleStyleRecalculation", "InvalidateLayout"]
            .choose(self.rng)
            .unwrap();
        self.events.push(json!({"pid": pid, "tid": tid, "ts": ts, "ph": "I", "s": "t", "cat": "devtools.timeline", "name": name, "args": {"data": {"frame": frame}}}));
    }

    /// One activity with random children in `[start, start + dur)`.
    fn node(&mut self, pid: i64, tid: i64, frame: &str, start: u64, dur: u64, depth: u32) {
        let roll = self.rng.gen_range(0..10);
        let (name, stage, args) = if depth == 0 && roll == 0 {
            (
                "ParseHTML".to_owned(),
                Stage::HtmlParsing,
                json!({"beginData": {"url": self.page, "frame": frame}}),
            )
        } else if roll < 5 {
            let url = self.scripts.choose(self.rng).unwrap().clone();
            (
                "EvaluateScript".to_owned(),
                Stage::Scripting,
                json!({"data": {"url": url, "frame": frame}}),
            )
        } else if roll < 7 {
            let n = *PLAIN_SCRIPT.choose(self.rng).unwrap();
            (
                n.to_owned(),
                Stage::Scripting,
                json!({"data": {"frame": frame}}),
            )
        } else {
            let (n, s, key) = *RENDER.choose(self.rng).unwrap();
            (n.to_owned(), s, json!({ key: {"frame": frame} }))
        };
        self.emit(pid, tid, start, dur, &name, args);
        self.activities += 1;

        let mut child_time = 0;
        if depth < 4 && dur >= 8 {
            let k = self.rng.gen_range(0..=3usize);
            let mut cuts: Vec<u64> = (0..2 * k)
                .map(|_| self.rng.gen_range(start..=start + dur))
                .collect();
            cuts.sort_unstable();
            for pair in cuts.chunks(2) {
                let (s, e) = (pair[0], pair[1]);
                if e <= s {
                    continue;
                }
                match self.rng.gen_range(0..8) {
                    0 => {
                        // Browser-internal work nested in the activity; stays in its self time.
                        let name = *["MinorGC", "V8.GCScavenger", "MysteryEvent"]
                            .choose(self.rng)
                            .unwrap();
                        self.events.push(json!({"pid": pid, "tid": tid, "ts": s, "ph": "X", "dur": e - s, "cat": "v8", "name": name, "args": {}}));
                    }
                    1 => self.marker(pid, tid, s, frame),
                    _ => {
                        self.node(pid, tid, frame, s, e - s, depth + 1);
                        child_time += e - s;
                    }
                }
            }
        }
        self.stage_self[stage_index(stage)] += dur - child_time;
    }
}

/// Writes a random bundle and returns it with its expected totals. At least
/// one top-level task evaluates an ad script.
pub fn synth_bundle(rng: &mut StdRng, n: usize) -> Synth {
    let page = format!("https://www.pub{n}.example/");
    let mut scripts = vec![
        format!("{page}js/app.js"),
        format!("{page}js/vendor.js"),
        "https://cdn.lib.example/lib.js".to_owned(),
    ];
    let ads = [
        "https://ads.adnet.example/tag.js",
        "https://px.trackerco.example/p.js",
    ];
    scripts.extend(ads.iter().map(|s| s.to_string()));

    let mut g = Gen {
        rng,
        events: Vec::new(),
        stage_self: [0; 6],
        activities: 0,
        scripts: scripts.clone(),
        page: page.clone(),
    };
    g.events.push(json!({"pid": 1, "tid": 1, "ts": 0, "ph": "M", "cat": "__metadata", "name": "thread_name", "args": {"name": "CrRendererMain"}}));

    let threads: Vec<(i64, i64, &str)> = vec![(1, 1, "F0"), (1, 2, "F0"), (2, 1, "F1")];
    let used = g.rng.gen_range(1..=threads.len());
    let mut end = 0;
    for (i, &(pid, tid, frame)) in threads[..used].iter().enumerate() {
        let mut t = 1000 + g.rng.gen_range(0..50);
        let tasks = g.rng.gen_range(1..12);
        for j in 0..tasks {
            let dur = g.rng.gen_range(1..400);
            if g.rng.gen_bool(0.3) {
                g.events.push(json!({"pid": pid, "tid": tid, "ts": t - 1, "ph": "X", "dur": dur + 2, "cat": "toplevel", "name": "RunTask", "args": {}}));
            }
            if i == 0 && j == 0 {
                let url = ads[0];
                g.emit(
                    pid,
                    tid,
                    t,
                    dur,
                    "EvaluateScript",
                    json!({"data": {"url": url, "frame": frame}}),
                );
                g.activities += 1;
                g.stage_self[stage_index(Stage::Scripting)] += dur;
            } else {
                g.node(pid, tid, frame, t, dur, 0);
            }
            t += dur + g.rng.gen_range(0..30);
        }
        end = end.max(t);
    }

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let meta = json!({"pageUrl": page, "crawlMode": "landing", "repeatIndex": 0});
    std::fs::write(p.join("meta.json"), meta.to_string()).unwrap();
    std::fs::write(p.join("trace.json"), Value::Array(g.events).to_string()).unwrap();

    let mut net = String::new();
    let mut deps = String::new();
    let mut all = vec![page.clone()];
    all.extend(scripts);
    for (i, url) in all.iter().enumerate() {
        let s = g.rng.gen_range(0..end);
        let e = s + g.rng.gen_range(1..500);
        let (mime, rt) = if i == 0 {
            ("text/html", "Document")
        } else {
            ("application/javascript", "Script")
        };
        net.push_str(&json!({"requestId": i.to_string(), "url": url, "method": "GET", "mimeType": mime, "resourceType": rt, "startTime": s, "endTime": e}).to_string());
        net.push('\n');
        if i > 0 {
            deps.push_str(
                &json!({"childUrl": url, "parentUrl": page, "initiatorKind": "parser"}).to_string(),
            );
            deps.push('\n');
        }
    }
    std::fs::write(p.join("network.jsonl"), net).unwrap();
    std::fs::write(p.join("deps.jsonl"), deps).unwrap();

    let total = g.stage_self.iter().sum();
    Synth {
        dir,
        stage_self: g.stage_self,
        total,
        activities: g.activities,
    }
}
