//! Resource dependency graphs.
//!
//! The tree is rooted at the publisher page. Each node is one URL at one
//! depth; a URL requested from two depths appears at both. Collapsing merges
//! nodes of the same registrable domain at the same depth, and a collapsed
//! node is an ad domain when at least one of its resources is an ad.

mod export;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use url::Url;

pub use export::{export_graph, import_graph, GraphFormat};

use crate::domain::url_domain;
use crate::filter::ResourceRecord;
use crate::ingest::{DepEdge, InitiatorKind};
use crate::warnings::{self, Warnings};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceNode {
    pub url: Url,
    pub domain: String,
    pub level: usize,
    pub is_ad: bool,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Dependency tree; node 0 is the root.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceTree {
    pub nodes: Vec<ResourceNode>,
    /// Edges whose first-party referrer was replaced by the third-party
    /// script that issued the request.
    pub rewritten_edges: usize,
    pub warnings: Warnings,
}

impl ResourceTree {
    pub fn root(&self) -> &ResourceNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ResourceNode> {
        self.nodes.iter().filter(|n| n.children.is_empty())
    }

    /// Distinct domains present anywhere in the tree.
    pub fn domains(&self) -> BTreeSet<&str> {
        self.nodes.iter().map(|n| n.domain.as_str()).collect()
    }
}

/// Applies the AJAX referrer correction to one edge.
///
/// A request from third-party script running in the first-party context
/// reports the first-party page as its parent; the parent becomes the
/// script's URL instead.
fn corrected_parent(
    edge: &DepEdge,
    page_domain: &str,
    initiators: &BTreeMap<Url, Url>,
) -> Option<Url> {
    if edge.initiator_kind != InitiatorKind::Script || url_domain(&edge.parent_url) != page_domain {
        return None;
    }
    let script = edge
        .initiator_url
        .as_ref()
        .or_else(|| initiators.get(&edge.child_url))?;
    (url_domain(script) != page_domain && *script != edge.child_url).then(|| script.clone())
}

struct Builder<'a> {
    nodes: Vec<ResourceNode>,
    children: &'a BTreeMap<Url, Vec<Url>>,
    ads: &'a HashMap<&'a Url, bool>,
    placed: HashSet<(Url, usize)>,
    reached: HashSet<Url>,
    warnings: Warnings,
}

impl Builder<'_> {
    fn add(&mut self, url: Url, level: usize, parent: Option<usize>) -> usize {
        let id = self.nodes.len();
        self.placed.insert((url.clone(), level));
        self.reached.insert(url.clone());
        self.nodes.push(ResourceNode {
            domain: url_domain(&url),
            is_ad: self.ads.get(&url).copied().unwrap_or(false),
            url,
            level,
            parent,
            children: Vec::new(),
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        id
    }

    fn on_path(&self, mut id: usize, url: &Url) -> bool {
        loop {
            if self.nodes[id].url == *url {
                return true;
            }
            match self.nodes[id].parent {
                Some(p) => id = p,
                None => return false,
            }
        }
    }

    /// Breadth-first expansion below `start`.
    fn expand(&mut self, start: usize) {
        let mut queue = VecDeque::from([start]);
        while let Some(id) = queue.pop_front() {
            let url = self.nodes[id].url.clone();
            let level = self.nodes[id].level + 1;
            let Some(kids) = self.children.get(&url) else {
                continue;
            };
            for child in kids {
                if self.on_path(id, child) {
                    self.warnings.bump(warnings::GRAPH_CYCLE);
                    continue;
                }
                if self.placed.contains(&(child.clone(), level)) {
                    continue;
                }
                let cid = self.add(child.clone(), level, Some(id));
                queue.push_back(cid);
            }
        }
    }
}

/// Builds the dependency tree for one page load.
///
/// `initiators` maps request URLs to the script that issued them (as
/// recovered from the trace); it backs up `DepEdge::initiator_url` for the
/// AJAX referrer correction. Subtrees not reachable from the page are
/// attached to the root and counted; back edges of redirect loops are
/// dropped and counted.
pub fn build_graph(
    deps: &[DepEdge],
    resources: &[ResourceRecord],
    page_url: &Url,
    initiators: &BTreeMap<Url, Url>,
) -> ResourceTree {
    let page_domain = url_domain(page_url);
    let ads: HashMap<&Url, bool> = resources.iter().map(|r| (&r.url, r.is_ad)).collect();

    let mut rewritten = 0;
    let mut seen_edges: HashSet<(Url, Url)> = HashSet::new();
    let mut children: BTreeMap<Url, Vec<Url>> = BTreeMap::new();
    let mut parents_of: BTreeMap<Url, Vec<Url>> = BTreeMap::new();
    let mut child_order: Vec<Url> = Vec::new();
    for edge in deps {
        let parent = match corrected_parent(edge, &page_domain, initiators) {
            Some(p) => {
                rewritten += 1;
                p
            }
            None => edge.parent_url.clone(),
        };
        if parent == edge.child_url || !seen_edges.insert((edge.child_url.clone(), parent.clone()))
        {
            continue;
        }
        if !parents_of.contains_key(&edge.child_url) {
            child_order.push(edge.child_url.clone());
        }
        parents_of
            .entry(edge.child_url.clone())
            .or_default()
            .push(parent.clone());
        children
            .entry(parent)
            .or_default()
            .push(edge.child_url.clone());
    }

    let mut b = Builder {
        nodes: Vec::new(),
        children: &children,
        ads: &ads,
        placed: HashSet::new(),
        reached: HashSet::new(),
        warnings: Warnings::new(),
    };
    b.add(page_url.clone(), 0, None);
    b.expand(0);

    for url in &child_order {
        if b.reached.contains(url) {
            continue;
        }
        // Walk up to the head of the unreachable component.
        let mut head = url.clone();
        let mut walked = HashSet::from([head.clone()]);
        while let Some(p) = parents_of.get(&head).and_then(|ps| ps.first()) {
            if !parents_of.contains_key(p) || b.reached.contains(p) || !walked.insert(p.clone()) {
                break;
            }
            head = p.clone();
        }
        b.warnings.bump(warnings::GRAPH_ORPHAN);
        let id = b.add(head, 1, Some(0));
        b.expand(id);
    }

    ResourceTree {
        nodes: b.nodes,
        rewritten_edges: rewritten,
        warnings: b.warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DomainNode {
    pub domain: String,
    pub level: usize,
    pub member_urls: Vec<Url>,
    pub is_ad_domain: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DomainEdge {
    pub from: usize,
    pub to: usize,
    /// Number of resource-level edges merged into this one.
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGraph {
    /// Sorted by `(level, domain)`.
    pub nodes: Vec<DomainNode>,
    /// Sorted by `(from, to)`.
    pub edges: Vec<DomainEdge>,
}

impl DomainGraph {
    pub fn ad_domains(&self) -> impl Iterator<Item = &DomainNode> {
        self.nodes.iter().filter(|n| n.is_ad_domain)
    }

    pub fn nodes_at(&self, level: usize) -> impl Iterator<Item = &DomainNode> {
        self.nodes.iter().filter(move |n| n.level == level)
    }
}

/// Merges tree nodes by `(registrable domain, level)`.
pub fn collapse_by_domain(tree: &ResourceTree) -> DomainGraph {
    let mut groups: BTreeMap<(usize, &str), (BTreeSet<&Url>, bool)> = BTreeMap::new();
    for n in &tree.nodes {
        let g = groups.entry((n.level, n.domain.as_str())).or_default();
        g.0.insert(&n.url);
        g.1 |= n.is_ad;
    }
    let index: HashMap<(usize, &str), usize> =
        groups.keys().enumerate().map(|(i, k)| (*k, i)).collect();

    let mut weights: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for n in &tree.nodes {
        if let Some(p) = n.parent {
            let parent = &tree.nodes[p];
            let from = index[&(parent.level, parent.domain.as_str())];
            let to = index[&(n.level, n.domain.as_str())];
            *weights.entry((from, to)).or_insert(0) += 1;
        }
    }

    DomainGraph {
        nodes: groups
            .into_iter()
            .map(|((level, domain), (urls, is_ad))| DomainNode {
                domain: domain.to_owned(),
                level,
                member_urls: urls.into_iter().cloned().collect(),
                is_ad_domain: is_ad,
            })
            .collect(),
        edges: weights
            .into_iter()
            .map(|((from, to), weight)| DomainEdge { from, to, weight })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainDepthStats {
    pub mean: f64,
    pub max: usize,
    /// Root-to-leaf depth of every leaf, in node order.
    pub per_leaf_depths: Vec<usize>,
}

pub fn chain_depth_stats(tree: &ResourceTree) -> ChainDepthStats {
    let depths: Vec<usize> = tree.leaves().map(|n| n.level).collect();
    let mean = if depths.is_empty() {
        0.0
    } else {
        depths.iter().sum::<usize>() as f64 / depths.len() as f64
    };
    ChainDepthStats {
        mean,
        max: depths.iter().copied().max().unwrap_or(0),
        per_leaf_depths: depths,
    }
}
