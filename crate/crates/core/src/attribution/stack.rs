use std::cmp::Reverse;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::stages::Activity;
use crate::warnings::{self, Warnings};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StackNode {
    pub activity_id: usize,
    pub parent_id: Option<usize>,
    pub child_ids: Vec<usize>,
}

/// Per-thread call stacks over a set of activities, indexed by activity id.
#[derive(Debug, Clone, Default)]
pub struct CallForest {
    pub nodes: Vec<StackNode>,
    /// End time after overlap repair. Equals the activity end unless the
    /// activity partially overlapped its enclosing activity.
    pub effective_end: Vec<u64>,
    pub self_time: Vec<u64>,
    /// Root activity ids per `(pid, tid)`, in start order.
    pub roots: BTreeMap<(i64, i64), Vec<usize>>,
    pub warnings: Warnings,
}

impl CallForest {
    pub fn parent(&self, id: usize) -> Option<usize> {
        self.nodes[id].parent_id
    }

    pub fn depth(&self, id: usize) -> usize {
        std::iter::successors(self.parent(id), |&p| self.parent(p)).count()
    }

    /// Ancestors of `id`, innermost first.
    pub fn ancestors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.parent(id), move |&p| self.parent(p))
    }

    pub fn effective_duration(&self, start: u64, id: usize) -> u64 {
        self.effective_end[id] - start
    }
}

struct ThreadStacks {
    thread: (i64, i64),
    parents: Vec<(usize, Option<usize>)>,
    truncated: Vec<(usize, u64)>,
    roots: Vec<usize>,
}

fn build_thread(thread: (i64, i64), mut ids: Vec<usize>, activities: &[Activity]) -> ThreadStacks {
    ids.sort_by_key(|&i| (activities[i].start, Reverse(activities[i].duration()), i));
    let mut open: Vec<(usize, u64)> = Vec::new();
    let mut out = ThreadStacks {
        thread,
        parents: Vec::with_capacity(ids.len()),
        truncated: Vec::new(),
        roots: Vec::new(),
    };
    for id in ids {
        let a = &activities[id];
        let zero_length = a.end == a.start;
        while let Some(&(_, top_end)) = open.last() {
            let inside = a.start < top_end || (zero_length && a.start == top_end);
            if inside {
                break;
            }
            open.pop();
        }
        let mut end = a.end;
        let parent = open.last().map(|&(p, top_end)| {
            if end > top_end {
                end = top_end;
                out.truncated.push((id, top_end));
            }
            p
        });
        if parent.is_none() {
            out.roots.push(id);
        }
        out.parents.push((id, parent));
        open.push((id, end));
    }
    out
}

/// Builds per-thread call stacks: each activity's parent is the innermost
/// activity on the same thread that encloses it.
///
/// An activity that starts inside another but ends after it is truncated to
/// nest and counted under `stack.truncated_overlap`. Activity ids must equal
/// their index in `activities`.
pub fn build_call_stacks(activities: &[Activity]) -> CallForest {
    debug_assert!(activities.iter().enumerate().all(|(i, a)| a.id == i));

    let mut by_thread: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for a in activities {
        by_thread.entry(a.thread()).or_default().push(a.id);
    }
    let threads: Vec<ThreadStacks> = by_thread
        .into_par_iter()
        .map(|(thread, ids)| build_thread(thread, ids, activities))
        .collect();

    let mut forest = CallForest {
        nodes: activities
            .iter()
            .map(|a| StackNode {
                activity_id: a.id,
                parent_id: None,
                child_ids: Vec::new(),
            })
            .collect(),
        effective_end: activities.iter().map(|a| a.end).collect(),
        self_time: vec![0; activities.len()],
        roots: BTreeMap::new(),
        warnings: Warnings::new(),
    };

    for t in threads {
        for (id, parent) in t.parents {
            forest.nodes[id].parent_id = parent;
            if let Some(p) = parent {
                forest.nodes[p].child_ids.push(id);
            }
        }
        forest
            .warnings
            .add(warnings::STACK_TRUNCATED_OVERLAP, t.truncated.len() as u64);
        for (id, end) in t.truncated {
            forest.effective_end[id] = end;
        }
        forest.roots.insert(t.thread, t.roots);
    }

    for a in activities {
        let own = forest.effective_end[a.id] - a.start;
        let nested: u64 = forest.nodes[a.id]
            .child_ids
            .iter()
            .map(|&c| forest.effective_end[c] - activities[c].start)
            .sum();
        forest.self_time[a.id] = own - nested;
    }
    forest
}
