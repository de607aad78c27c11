//! Event-array trace parsing.
//!
//! Accepts either a bare JSON array of events or an object carrying a
//! `traceEvents` array. Bare arrays are read one object at a time so that a
//! dump cut off mid-write is recovered up to its last complete record.

use std::cmp::Reverse;
use std::collections::HashMap;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::warnings::{self, Warnings};

/// Trace event phase code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Complete,
    Begin,
    End,
    Instant,
    /// Nestable or legacy async events (`b`, `e`, `n`, `S`, `T`, `p`, `F`).
    Async(char),
    Metadata,
    Other(char),
}

impl Phase {
    pub fn from_char(c: char) -> Self {
        match c {
            'X' => Phase::Complete,
            'B' => Phase::Begin,
            'E' => Phase::End,
            'I' | 'i' | 'R' => Phase::Instant,
            'b' | 'e' | 'n' | 'S' | 'T' | 'p' | 'F' => Phase::Async(c),
            'M' => Phase::Metadata,
            other => Phase::Other(other),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Phase::Complete => 'X',
            Phase::Begin => 'B',
            Phase::End => 'E',
            Phase::Instant => 'I',
            Phase::Metadata => 'M',
            Phase::Async(c) | Phase::Other(c) => c,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl Serialize for Phase {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut buf = [0u8; 4];
        s.serialize_str(self.as_char().encode_utf8(&mut buf))
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Ok(Phase::from_char(c)),
            _ => Err(de::Error::custom(format!(
                "phase must be one character, got {s:?}"
            ))),
        }
    }
}

/// One timeline record. Timestamps are integer microseconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub pid: i64,
    pub tid: i64,
    pub ts: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dur: Option<u64>,
    pub ph: Phase,
    pub cat: String,
    pub name: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub args: Value,
}

impl TraceEvent {
    pub fn end(&self) -> u64 {
        self.ts + self.dur.unwrap_or(0)
    }

    /// Looks up a string at a nested path under `args`.
    pub fn arg_str(&self, path: &[&str]) -> Option<&str> {
        let mut v = &self.args;
        for key in path {
            v = v.get(key)?;
        }
        v.as_str()
    }
}

/// Wire shape used only while reading; numeric fields are accepted as
/// integers or decimals and rounded to whole microseconds at this boundary.
#[derive(Deserialize)]
struct RawEvent {
    #[serde(default)]
    pid: Option<Value>,
    #[serde(default)]
    tid: Option<Value>,
    #[serde(default)]
    ts: Option<serde_json::Number>,
    #[serde(default)]
    dur: Option<serde_json::Number>,
    ph: Phase,
    #[serde(default)]
    cat: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    args: Value,
}

fn micros(n: &serde_json::Number, field: &str) -> std::result::Result<u64, String> {
    if let Some(u) = n.as_u64() {
        return Ok(u);
    }
    match n.as_f64() {
        Some(f) if f.is_finite() && f >= 0.0 => Ok(f.round() as u64),
        _ => Err(format!("{field} must be a non-negative number, got {n}")),
    }
}

fn id_value(v: &Option<Value>) -> std::result::Result<i64, String> {
    match v {
        None | Some(Value::Null) => Ok(0),
        Some(Value::Number(n)) => n
            .as_i64()
            .or_else(|| n.as_f64().map(|f| f as i64))
            .ok_or_else(|| format!("bad id {n}")),
        // Some producers write thread ids as strings.
        Some(Value::String(s)) => s.parse().map_err(|_| format!("bad id {s:?}")),
        Some(other) => Err(format!("bad id {other}")),
    }
}

impl RawEvent {
    fn into_event(self) -> std::result::Result<TraceEvent, String> {
        let ts = match (&self.ts, self.ph) {
            (Some(n), _) => micros(n, "ts")?,
            (None, Phase::Metadata) => 0,
            (None, _) => return Err("missing ts".into()),
        };
        let dur = self.dur.as_ref().map(|n| micros(n, "dur")).transpose()?;
        if self.ph == Phase::Complete && dur.is_none() {
            return Err("complete event without dur".into());
        }
        Ok(TraceEvent {
            pid: id_value(&self.pid)?,
            tid: id_value(&self.tid)?,
            ts,
            dur,
            ph: self.ph,
            cat: self.cat,
            name: self.name,
            args: self.args,
        })
    }
}

/// Result of reading a trace file.
#[derive(Debug, Clone, Default)]
pub struct ParsedTrace {
    pub events: Vec<TraceEvent>,
    /// Complete events present in the input before fusion.
    pub complete_in: usize,
    /// Begin/end pairs fused into complete events.
    pub fused_pairs: usize,
    pub warnings: Warnings,
}

/// Parses a trace, fuses begin/end pairs, and sorts by `(pid, tid, ts, -dur)`
/// with input order breaking remaining ties.
pub fn parse_trace(raw: &[u8]) -> Result<ParsedTrace> {
    let mut warnings = Warnings::new();
    let records = read_records(raw, &mut warnings)?;
    let complete_in = records
        .iter()
        .filter(|(_, e)| e.ph == Phase::Complete)
        .count();
    let (events, fused_pairs) = fuse(records, &mut warnings);
    Ok(ParsedTrace {
        events,
        complete_in,
        fused_pairs,
        warnings,
    })
}

fn skip_ws(raw: &[u8], mut pos: usize) -> usize {
    while pos < raw.len() && raw[pos].is_ascii_whitespace() {
        pos += 1;
    }
    pos
}

fn read_records(raw: &[u8], warnings: &mut Warnings) -> Result<Vec<(usize, TraceEvent)>> {
    let start = skip_ws(raw, 0);
    match raw.get(start) {
        None => Ok(Vec::new()),
        Some(b'[') => read_array(raw, start + 1, warnings),
        Some(b'{') => read_object_form(raw, start),
        Some(_) => Err(Error::MalformedTrace {
            offset: start,
            message: "expected '[' or '{'".into(),
        }),
    }
}

fn read_array(
    raw: &[u8],
    mut pos: usize,
    warnings: &mut Warnings,
) -> Result<Vec<(usize, TraceEvent)>> {
    let mut out = Vec::new();
    loop {
        pos = skip_ws(raw, pos);
        match raw.get(pos) {
            None => {
                warnings.bump(warnings::TRACE_TRUNCATED);
                return Ok(out);
            }
            Some(b']') => return Ok(out),
            Some(b',') => {
                pos += 1;
                continue;
            }
            Some(_) => {}
        }
        let mut stream = serde_json::Deserializer::from_slice(&raw[pos..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value)) => {
                let record_at = pos;
                pos += stream.byte_offset();
                let raw_event: RawEvent =
                    serde_json::from_value(value).map_err(|e| Error::MalformedTrace {
                        offset: record_at,
                        message: e.to_string(),
                    })?;
                let event = raw_event
                    .into_event()
                    .map_err(|message| Error::MalformedTrace {
                        offset: record_at,
                        message,
                    })?;
                out.push((out.len(), event));
            }
            Some(Err(e)) if e.is_eof() => {
                warnings.bump(warnings::TRACE_TRUNCATED);
                return Ok(out);
            }
            Some(Err(e)) => {
                return Err(Error::MalformedTrace {
                    offset: pos + e.column().saturating_sub(1),
                    message: e.to_string(),
                })
            }
            None => {
                warnings.bump(warnings::TRACE_TRUNCATED);
                return Ok(out);
            }
        }
    }
}

fn read_object_form(raw: &[u8], start: usize) -> Result<Vec<(usize, TraceEvent)>> {
    #[derive(Deserialize)]
    struct Wrapper {
        #[serde(rename = "traceEvents")]
        trace_events: Vec<Value>,
    }
    let wrapper: Wrapper =
        serde_json::from_slice(&raw[start..]).map_err(|e| Error::MalformedTrace {
            offset: start,
            message: e.to_string(),
        })?;
    wrapper
        .trace_events
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let ev = serde_json::from_value::<RawEvent>(v)
                .map_err(|e| e.to_string())
                .and_then(RawEvent::into_event)
                .map_err(|message| Error::MalformedTrace {
                    offset: start,
                    message,
                })?;
            Ok((i, ev))
        })
        .collect()
}

fn merge_args(begin: Value, end: Value) -> Value {
    match (begin, end) {
        (Value::Object(mut b), Value::Object(e)) => {
            for (k, v) in e {
                b.entry(k).or_insert(v);
            }
            Value::Object(b)
        }
        (Value::Null, e) => e,
        (b, _) => b,
    }
}

fn fuse(records: Vec<(usize, TraceEvent)>, warnings: &mut Warnings) -> (Vec<TraceEvent>, usize) {
    let mut slots: Vec<Option<(usize, TraceEvent)>> = Vec::with_capacity(records.len());
    let mut open: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut fused = 0usize;

    for (seq, ev) in records {
        match ev.ph {
            Phase::Begin => {
                open.entry((ev.pid, ev.tid)).or_default().push(slots.len());
                slots.push(Some((seq, ev)));
            }
            Phase::End => {
                let stack = open.entry((ev.pid, ev.tid)).or_default();
                let top = stack.last().copied();
                let matched = top.filter(|&i| {
                    let (_, b) = slots[i].as_ref().expect("open begin slot");
                    ev.name.is_empty() || ev.name == b.name
                });
                let Some(i) = matched else {
                    warnings.bump(warnings::TRACE_UNMATCHED_END);
                    continue;
                };
                stack.pop();
                let (bseq, begin) = slots[i].take().expect("open begin slot");
                if ev.ts < begin.ts {
                    warnings.bump(warnings::TRACE_NEGATIVE_SPAN);
                    continue;
                }
                fused += 1;
                slots[i] = Some((
                    bseq,
                    TraceEvent {
                        dur: Some(ev.ts - begin.ts),
                        ph: Phase::Complete,
                        args: merge_args(begin.args, ev.args),
                        ..begin
                    },
                ));
            }
            _ => slots.push(Some((seq, ev))),
        }
    }

    for stack in open.values() {
        for &i in stack {
            if slots[i].take().is_some() {
                warnings.bump(warnings::TRACE_UNMATCHED_BEGIN);
            }
        }
    }

    let mut events: Vec<(usize, TraceEvent)> = slots.into_iter().flatten().collect();
    events.sort_by_key(|(seq, e)| (e.pid, e.tid, e.ts, Reverse(e.dur.unwrap_or(0)), *seq));
    (events.into_iter().map(|(_, e)| e).collect(), fused)
}

/// Serializes events to the canonical event-array form.
pub fn write_trace(events: &[TraceEvent]) -> Vec<u8> {
    serde_json::to_vec(events).expect("trace events serialize")
}
