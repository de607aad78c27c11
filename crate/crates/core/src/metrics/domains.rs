use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{network_time, AdLookup, NetworkTime};
use crate::attribution::AttributedActivity;
use crate::filter::ResourceRecord;
use crate::graph::DomainGraph;

/// Ad cost of one page load, per ad domain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PageDomainCosts {
    /// Ad self time in microseconds.
    pub computation: BTreeMap<String, u64>,
    /// Ad request time in microseconds.
    pub network: BTreeMap<String, u64>,
    /// Domains that served at least one ad on the page.
    pub ad_domains: BTreeSet<String>,
}

pub fn page_domain_costs(
    attributed: &[AttributedActivity],
    resources: &[ResourceRecord],
    graph: &DomainGraph,
    mode: NetworkTime,
) -> PageDomainCosts {
    let lookup = AdLookup::new(resources);
    let mut out = PageDomainCosts::default();
    for a in attributed.iter().filter(|a| lookup.is_ad(a)) {
        let url = a.resource.as_ref().expect("ad activities carry a resource");
        let domain = lookup.domain(url).expect("ad verdicts come from records");
        *out.computation.entry(domain.to_owned()).or_insert(0) += a.activity.self_time;
    }
    let mut by_domain: BTreeMap<&str, Vec<&ResourceRecord>> = BTreeMap::new();
    for r in resources.iter().filter(|r| r.is_ad) {
        by_domain.entry(&r.domain).or_default().push(r);
    }
    for (domain, recs) in by_domain {
        out.network
            .insert(domain.to_owned(), network_time(recs, mode));
        out.ad_domains.insert(domain.to_owned());
    }
    out.ad_domains
        .extend(graph.ad_domains().map(|n| n.domain.clone()));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DomainCost {
    pub domain: String,
    pub computation_time: u64,
    pub network_time: u64,
    pub computation_share: f64,
    pub network_share: f64,
    /// Number of distinct sites whose pages used this ad domain.
    pub referrer_count: u64,
}

/// Sums page costs across a corpus. Merging is order independent.
#[derive(Debug, Clone, Default)]
pub struct DomainCostAccumulator {
    computation: BTreeMap<String, u64>,
    network: BTreeMap<String, u64>,
    referrers: BTreeMap<String, BTreeSet<String>>,
}

impl DomainCostAccumulator {
    pub fn add_page(&mut self, site: &str, page: &PageDomainCosts) {
        for (d, t) in &page.computation {
            *self.computation.entry(d.clone()).or_insert(0) += t;
        }
        for (d, t) in &page.network {
            *self.network.entry(d.clone()).or_insert(0) += t;
        }
        for d in &page.ad_domains {
            self.referrers
                .entry(d.clone())
                .or_default()
                .insert(site.to_owned());
        }
    }

    /// Domains sorted by computation share, then network share, then name.
    pub fn finish(&self) -> Vec<DomainCost> {
        let comp_total: u64 = self.computation.values().sum();
        let net_total: u64 = self.network.values().sum();
        let share = |t: u64, total: u64| {
            if total == 0 {
                0.0
            } else {
                t as f64 / total as f64
            }
        };
        let mut out: Vec<DomainCost> = self
            .referrers
            .iter()
            .map(|(d, sites)| {
                let c = self.computation.get(d).copied().unwrap_or(0);
                let n = self.network.get(d).copied().unwrap_or(0);
                DomainCost {
                    domain: d.clone(),
                    computation_time: c,
                    network_time: n,
                    computation_share: share(c, comp_total),
                    network_share: share(n, net_total),
                    referrer_count: sites.len() as u64,
                }
            })
            .collect();
        out.sort_by(|a, b| {
            b.computation_time
                .cmp(&a.computation_time)
                .then(b.network_time.cmp(&a.network_time))
                .then_with(|| a.domain.cmp(&b.domain))
        });
        out
    }
}

/// Domain costs of a single page.
pub fn domain_cost(
    attributed: &[AttributedActivity],
    resources: &[ResourceRecord],
    graph: &DomainGraph,
    site: &str,
    mode: NetworkTime,
) -> Vec<DomainCost> {
    let mut acc = DomainCostAccumulator::default();
    acc.add_page(site, &page_domain_costs(attributed, resources, graph, mode));
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ContentType;
    use crate::metrics::tests::{act, rec};
    use crate::stages::Stage;

    fn empty_graph() -> DomainGraph {
        DomainGraph {
            nodes: vec![],
            edges: vec![],
        }
    }

    #[test]
    fn seventy_thirty_split() {
        let resources = vec![
            rec(
                "https://x.adone.com/a.js",
                ContentType::Script,
                true,
                &[(0, 10)],
            ),
            rec(
                "https://adtwo.net/b.js",
                ContentType::Script,
                true,
                &[(0, 30)],
            ),
            rec(
                "https://pub.com/m.js",
                ContentType::Script,
                false,
                &[(0, 99)],
            ),
        ];
        let acts = vec![
            act(Stage::Scripting, 50, Some("https://x.adone.com/a.js")),
            act(Stage::Layout, 20, Some("https://x.adone.com/a.js")),
            act(Stage::Scripting, 30, Some("https://adtwo.net/b.js")),
            act(Stage::Scripting, 500, Some("https://pub.com/m.js")),
        ];
        let costs = domain_cost(
            &acts,
            &resources,
            &empty_graph(),
            "pub.com",
            NetworkTime::Sum,
        );
        let got: Vec<_> = costs
            .iter()
            .map(|c| (c.domain.as_str(), c.computation_share, c.network_share))
            .collect();
        assert_eq!(
            got,
            vec![("adone.com", 0.7, 0.25), ("adtwo.net", 0.3, 0.75)]
        );
    }

    #[test]
    fn single_ad_domain_and_referrers() {
        let resources = vec![rec(
            "https://ad.com/a.js",
            ContentType::Script,
            true,
            &[(0, 10)],
        )];
        let acts = vec![act(Stage::Scripting, 5, Some("https://ad.com/a.js"))];
        let page = page_domain_costs(&acts, &resources, &empty_graph(), NetworkTime::Sum);
        let mut acc = DomainCostAccumulator::default();
        acc.add_page("a.com", &page);
        acc.add_page("b.com", &page);
        acc.add_page("a.com", &page);
        let costs = acc.finish();
        assert_eq!(costs.len(), 1);
        assert_eq!(
            (costs[0].computation_share, costs[0].referrer_count),
            (1.0, 2)
        );
        assert_eq!(costs[0].computation_time, 15);
    }
}
