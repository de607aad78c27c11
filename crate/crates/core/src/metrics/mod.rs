//! Ad-cost measures.
//!
//! Computation cost is measured in self time of attributed activities and
//! network cost in request time. Every ratio is carried with a flag telling
//! whether its denominator was zero; an undefined ratio reads as 0.

mod domains;
mod scores;

use std::collections::{HashMap, HashSet};
use std::ops::AddAssign;
use std::str::FromStr;

use serde::Serialize;
use url::Url;

pub use domains::{
    domain_cost, page_domain_costs, DomainCost, DomainCostAccumulator, PageDomainCosts,
};
pub use scores::{
    fraction_cdf, median, popularity_cdf, trust_cdf, vt_red_flag_bucket, vt_score, wot_score,
    CdfPoint, CdfSeries, CostKind, ScoreTable, Scorer, TrustScore, WotBands, WotRating,
};

use crate::attribution::AttributedActivity;
use crate::error::{Error, Result};
use crate::filter::ResourceRecord;
use crate::ingest::ContentType;
use crate::stages::Stage;

/// A ratio and whether its denominator was zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ratio {
    pub value: f64,
    pub undefined: bool,
}

impl Ratio {
    pub fn of(num: u64, den: u64) -> Ratio {
        if den == 0 {
            Ratio {
                value: 0.0,
                undefined: true,
            }
        } else {
            Ratio {
                value: num as f64 / den as f64,
                undefined: false,
            }
        }
    }
}

/// How request time is aggregated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkTime {
    /// Per-request durations summed independently, overlaps included.
    #[default]
    Sum,
    /// Length of the union of request intervals.
    Wallclock,
}

impl FromStr for NetworkTime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sum" => Ok(NetworkTime::Sum),
            "wallclock" => Ok(NetworkTime::Wallclock),
            other => Err(format!(
                "unknown network time mode {other:?} (expected sum or wallclock)"
            )),
        }
    }
}

/// Length of the union of half-open intervals.
pub fn union_length(intervals: impl IntoIterator<Item = (u64, u64)>) -> u64 {
    let mut v: Vec<(u64, u64)> = intervals.into_iter().filter(|(s, e)| e > s).collect();
    v.sort_unstable();
    let mut total = 0;
    let mut cur: Option<(u64, u64)> = None;
    for (s, e) in v {
        match cur {
            Some((cs, ce)) if s <= ce => cur = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                cur = Some((s, e));
            }
            None => cur = Some((s, e)),
        }
    }
    total + cur.map_or(0, |(s, e)| e - s)
}

pub(crate) fn network_time<'a>(
    records: impl IntoIterator<Item = &'a ResourceRecord>,
    mode: NetworkTime,
) -> u64 {
    match mode {
        NetworkTime::Sum => records.into_iter().map(ResourceRecord::summed_time).sum(),
        NetworkTime::Wallclock => union_length(
            records
                .into_iter()
                .flat_map(|r| r.intervals.iter().copied()),
        ),
    }
}

/// URL lookup of ad verdicts.
pub struct AdLookup<'a> {
    ads: HashSet<&'a Url>,
    domains: HashMap<&'a Url, &'a str>,
}

impl<'a> AdLookup<'a> {
    pub fn new(resources: &'a [ResourceRecord]) -> AdLookup<'a> {
        AdLookup {
            ads: resources
                .iter()
                .filter(|r| r.is_ad)
                .map(|r| &r.url)
                .collect(),
            domains: resources
                .iter()
                .map(|r| (&r.url, r.domain.as_str()))
                .collect(),
        }
    }

    pub fn is_ad(&self, a: &AttributedActivity) -> bool {
        a.resource.as_ref().is_some_and(|u| self.ads.contains(u))
    }

    pub fn domain(&self, url: &Url) -> Option<&'a str> {
        self.domains.get(url).copied()
    }
}

/// Ad self time over all self time. Unattributed time counts only in the
/// denominator.
pub fn computation_cost_fraction(
    attributed: &[AttributedActivity],
    resources: &[ResourceRecord],
) -> Result<f64> {
    let lookup = AdLookup::new(resources);
    let (ad, total) = attributed.iter().fold((0u64, 0u64), |(ad, total), a| {
        let t = a.activity.self_time;
        (ad + if lookup.is_ad(a) { t } else { 0 }, total + t)
    });
    if total == 0 {
        return Err(Error::ZeroTotal("computation"));
    }
    Ok(ad as f64 / total as f64)
}

pub fn network_cost_fraction(resources: &[ResourceRecord], mode: NetworkTime) -> Result<f64> {
    let total = network_time(resources, mode);
    if total == 0 {
        return Err(Error::ZeroTotal("network"));
    }
    let ad = network_time(resources.iter().filter(|r| r.is_ad), mode);
    Ok(ad as f64 / total as f64)
}

/// Raw per-stage self-time sums. Adding two of these merges pages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageCounts {
    pub ad: [u64; 6],
    pub non_ad: [u64; 6],
    pub unattributed: [u64; 6],
}

impl StageCounts {
    pub fn from_activities(
        attributed: &[AttributedActivity],
        resources: &[ResourceRecord],
    ) -> StageCounts {
        let lookup = AdLookup::new(resources);
        let mut c = StageCounts::default();
        for a in attributed {
            let i = a.activity.stage as usize;
            let t = a.activity.self_time;
            if a.resource.is_none() {
                c.unattributed[i] += t;
            } else if lookup.is_ad(a) {
                c.ad[i] += t;
            } else {
                c.non_ad[i] += t;
            }
        }
        c
    }

    pub fn total(&self, stage: Stage) -> u64 {
        let i = stage as usize;
        self.ad[i] + self.non_ad[i] + self.unattributed[i]
    }

    pub fn grand_total(&self) -> u64 {
        Stage::ALL.iter().map(|&s| self.total(s)).sum()
    }

    pub fn ad_total(&self) -> u64 {
        self.ad.iter().sum()
    }

    pub fn unattributed_total(&self) -> u64 {
        self.unattributed.iter().sum()
    }
}

impl AddAssign<&StageCounts> for StageCounts {
    fn add_assign(&mut self, rhs: &StageCounts) {
        for i in 0..6 {
            self.ad[i] += rhs.ad[i];
            self.non_ad[i] += rhs.non_ad[i];
            self.unattributed[i] += rhs.unattributed[i];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageRow {
    pub stage: Stage,
    pub ct_ad: u64,
    pub ct_total: u64,
    pub ct_unattributed: u64,
    /// Ad share of the stage.
    pub r1: Ratio,
    /// Stage share of all ad time.
    pub r2: Ratio,
    /// Stage share of all time.
    pub r3: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageMetrics {
    pub rows: Vec<StageRow>,
    pub ct_ad_total: u64,
    pub ct_grand_total: u64,
}

impl StageMetrics {
    pub fn from_counts(c: &StageCounts) -> StageMetrics {
        let ad_total = c.ad_total();
        let grand = c.grand_total();
        let rows = Stage::ALL
            .iter()
            .map(|&s| {
                let ad = c.ad[s as usize];
                let total = c.total(s);
                StageRow {
                    stage: s,
                    ct_ad: ad,
                    ct_total: total,
                    ct_unattributed: c.unattributed[s as usize],
                    r1: Ratio::of(ad, total),
                    r2: Ratio::of(ad, ad_total),
                    r3: Ratio::of(total, grand),
                }
            })
            .collect();
        StageMetrics {
            rows,
            ct_ad_total: ad_total,
            ct_grand_total: grand,
        }
    }

    pub fn row(&self, stage: Stage) -> &StageRow {
        &self.rows[stage as usize]
    }
}

pub fn stage_ratios(
    attributed: &[AttributedActivity],
    resources: &[ResourceRecord],
) -> StageMetrics {
    StageMetrics::from_counts(&StageCounts::from_activities(attributed, resources))
}

/// Raw per-content-type counts and times. Adding two of these merges pages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContentTypeCounts {
    pub nr_ad: [u64; 9],
    pub nr_total: [u64; 9],
    pub nt_ad: [u64; 9],
    pub nt_total: [u64; 9],
}

impl ContentTypeCounts {
    /// Only records with at least one fetch are counted.
    pub fn from_resources(resources: &[ResourceRecord], mode: NetworkTime) -> ContentTypeCounts {
        let mut c = ContentTypeCounts::default();
        for (i, ct) in ContentType::ALL.iter().enumerate() {
            let of_type: Vec<&ResourceRecord> = resources
                .iter()
                .filter(|r| r.content_type == *ct && !r.intervals.is_empty())
                .collect();
            c.nr_total[i] = of_type.len() as u64;
            c.nr_ad[i] = of_type.iter().filter(|r| r.is_ad).count() as u64;
            c.nt_total[i] = network_time(of_type.iter().copied(), mode);
            c.nt_ad[i] = network_time(of_type.iter().copied().filter(|r| r.is_ad), mode);
        }
        c
    }
}

impl AddAssign<&ContentTypeCounts> for ContentTypeCounts {
    fn add_assign(&mut self, rhs: &ContentTypeCounts) {
        for i in 0..9 {
            self.nr_ad[i] += rhs.nr_ad[i];
            self.nr_total[i] += rhs.nr_total[i];
            self.nt_ad[i] += rhs.nt_ad[i];
            self.nt_total[i] += rhs.nt_total[i];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContentTypeRow {
    pub content_type: ContentType,
    /// Whether any resource of this type was fetched.
    pub present: bool,
    pub nr_ad: u64,
    pub nr_total: u64,
    pub nt_ad: u64,
    pub nt_total: u64,
    pub nr_ad_over_type: Ratio,
    pub nr_ad_over_ads: Ratio,
    pub nr_type_over_all: Ratio,
    pub nt_ad_over_type: Ratio,
    pub nt_ad_over_ads: Ratio,
    pub nt_type_over_all: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContentTypeMetrics {
    pub rows: Vec<ContentTypeRow>,
}

impl ContentTypeMetrics {
    pub fn from_counts(c: &ContentTypeCounts) -> ContentTypeMetrics {
        let nr_ads: u64 = c.nr_ad.iter().sum();
        let nr_all: u64 = c.nr_total.iter().sum();
        let nt_ads: u64 = c.nt_ad.iter().sum();
        let nt_all: u64 = c.nt_total.iter().sum();
        let rows = ContentType::ALL
            .iter()
            .enumerate()
            .map(|(i, &ct)| ContentTypeRow {
                content_type: ct,
                present: c.nr_total[i] > 0,
                nr_ad: c.nr_ad[i],
                nr_total: c.nr_total[i],
                nt_ad: c.nt_ad[i],
                nt_total: c.nt_total[i],
                nr_ad_over_type: Ratio::of(c.nr_ad[i], c.nr_total[i]),
                nr_ad_over_ads: Ratio::of(c.nr_ad[i], nr_ads),
                nr_type_over_all: Ratio::of(c.nr_total[i], nr_all),
                nt_ad_over_type: Ratio::of(c.nt_ad[i], c.nt_total[i]),
                nt_ad_over_ads: Ratio::of(c.nt_ad[i], nt_ads),
                nt_type_over_all: Ratio::of(c.nt_total[i], nt_all),
            })
            .collect();
        ContentTypeMetrics { rows }
    }

    pub fn row(&self, ct: ContentType) -> &ContentTypeRow {
        &self.rows[ContentType::ALL
            .iter()
            .position(|c| *c == ct)
            .expect("closed set")]
    }
}

pub fn content_type_table(resources: &[ResourceRecord], mode: NetworkTime) -> ContentTypeMetrics {
    ContentTypeMetrics::from_counts(&ContentTypeCounts::from_resources(resources, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::AttributionPath;
    use crate::domain::url_domain;
    use crate::stages::Activity;

    fn u(s: &str) -> Url {
        Url::parse(s).unwrap()
    }

    pub(crate) fn act(stage: Stage, self_time: u64, resource: Option<&str>) -> AttributedActivity {
        AttributedActivity {
            activity: Activity {
                id: 0,
                stage,
                start: 0,
                end: self_time,
                self_time,
                pid: 1,
                tid: 1,
                name: "X".into(),
                resource_hint: None,
                frame_id: None,
            },
            resource: resource.map(u),
            attribution_path: if resource.is_some() {
                AttributionPath::ExplicitArgs
            } else {
                AttributionPath::Unattributed
            },
        }
    }

    pub(crate) fn rec(
        url: &str,
        ct: ContentType,
        ad: bool,
        intervals: &[(u64, u64)],
    ) -> ResourceRecord {
        let url = u(url);
        ResourceRecord {
            domain: url_domain(&url),
            url,
            content_type: ct,
            is_ad: ad,
            matched_rule: None,
            intervals: intervals.to_vec(),
        }
    }

    const AD: &str = "https://ads.example/a.js";
    const MAIN: &str = "https://pub.example/m.js";

    fn resources() -> Vec<ResourceRecord> {
        vec![
            rec(AD, ContentType::Script, true, &[(0, 40)]),
            rec(MAIN, ContentType::Script, false, &[(0, 160)]),
        ]
    }

    #[test]
    fn computation_fraction() {
        let acts = vec![
            act(Stage::Scripting, 15, Some(AD)),
            act(Stage::Scripting, 80, Some(MAIN)),
            act(Stage::Paint, 5, None),
        ];
        assert_eq!(
            computation_cost_fraction(&acts, &resources()).unwrap(),
            0.15
        );
        let no_ads = vec![act(Stage::Scripting, 80, Some(MAIN))];
        assert_eq!(
            computation_cost_fraction(&no_ads, &resources()).unwrap(),
            0.0
        );
        assert!(matches!(
            computation_cost_fraction(&[], &resources()),
            Err(Error::ZeroTotal(_))
        ));
    }

    #[test]
    fn network_fraction_sums_overlaps() {
        assert_eq!(
            network_cost_fraction(&resources(), NetworkTime::Sum).unwrap(),
            0.2
        );
        let overlapping = vec![
            rec(AD, ContentType::Script, true, &[(0, 100)]),
            rec(MAIN, ContentType::Script, false, &[(0, 100)]),
        ];
        assert_eq!(network_time(&overlapping, NetworkTime::Sum), 200);
        assert_eq!(network_time(&overlapping, NetworkTime::Wallclock), 100);
        assert_eq!(
            network_cost_fraction(&overlapping, NetworkTime::Wallclock).unwrap(),
            1.0
        );
        assert!(network_cost_fraction(&[], NetworkTime::Sum).is_err());
    }

    #[test]
    fn union_length_cases() {
        assert_eq!(
            union_length([(0, 10), (5, 15), (20, 25), (25, 30), (3, 3)]),
            25
        );
        assert_eq!(union_length([]), 0);
    }

    #[test]
    fn single_stage_no_ads() {
        let m = stage_ratios(&[act(Stage::Layout, 50, Some(MAIN))], &resources());
        let row = m.row(Stage::Layout);
        assert_eq!((row.r1.value, row.r2.value, row.r3.value), (0.0, 0.0, 1.0));
        assert!(row.r2.undefined);
        assert!(m.row(Stage::Paint).r1.undefined);
    }

    #[test]
    fn stage_ratio_identities() {
        let acts = vec![
            act(Stage::Scripting, 88, Some(AD)),
            act(Stage::Layout, 12, Some(AD)),
            act(Stage::Scripting, 300, Some(MAIN)),
            act(Stage::Paint, 7, None),
        ];
        let m = stage_ratios(&acts, &resources());
        assert_eq!(m.row(Stage::Scripting).r2.value, 0.88);
        assert_eq!(m.row(Stage::Scripting).r1.value, 88.0 / 388.0);
        let r2: f64 = m.rows.iter().map(|r| r.r2.value).sum();
        let r3: f64 = m.rows.iter().map(|r| r.r3.value).sum();
        assert!((r2 - 1.0).abs() < 1e-12 && (r3 - 1.0).abs() < 1e-12);
        assert_eq!(m.ct_grand_total, 407);
        assert_eq!(m.row(Stage::Paint).ct_unattributed, 7);
    }

    #[test]
    fn content_type_rows() {
        let rs = vec![
            rec(
                "https://a.example/1.js",
                ContentType::Script,
                true,
                &[(0, 10)],
            ),
            rec(
                "https://a.example/2.js",
                ContentType::Script,
                false,
                &[(0, 30)],
            ),
            rec(
                "https://a.example/i.png",
                ContentType::Image,
                true,
                &[(0, 20), (50, 60)],
            ),
            rec("https://a.example/never", ContentType::Xml, true, &[]),
        ];
        let t = content_type_table(&rs, NetworkTime::Sum);
        let s = t.row(ContentType::Script);
        assert_eq!((s.nr_ad, s.nr_total, s.nt_ad, s.nt_total), (1, 2, 10, 40));
        assert_eq!(s.nr_ad_over_type.value, 0.5);
        assert_eq!(s.nt_ad_over_ads.value, 0.25);
        assert_eq!(s.nt_type_over_all.value, 40.0 / 70.0);
        let x = t.row(ContentType::Xml);
        assert!(!x.present && x.nr_ad_over_type.undefined);
        let share: f64 = t.rows.iter().map(|r| r.nr_ad_over_ads.value).sum();
        assert_eq!(share, 1.0);
    }
}
