//! Trust and popularity scores, and the cumulative cost curves built on them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::DomainCost;
use crate::domain::registrable_domain;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WotRating {
    Excellent,
    Good,
    Unsatisfactory,
    Poor,
    VeryPoor,
}

impl fmt::Display for WotRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WotRating::Excellent => "excellent",
            WotRating::Good => "good",
            WotRating::Unsatisfactory => "unsatisfactory",
            WotRating::Poor => "poor",
            WotRating::VeryPoor => "very poor",
        })
    }
}

/// Lower bounds of the WOT rating bands on the normalized score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WotBands {
    pub excellent: f64,
    pub good: f64,
    pub unsatisfactory: f64,
    pub poor: f64,
}

impl Default for WotBands {
    fn default() -> Self {
        WotBands {
            excellent: 0.8,
            good: 0.6,
            unsatisfactory: 0.4,
            poor: 0.2,
        }
    }
}

impl WotBands {
    pub fn rate(&self, score: f64) -> WotRating {
        if score >= self.excellent {
            WotRating::Excellent
        } else if score >= self.good {
            WotRating::Good
        } else if score >= self.unsatisfactory {
            WotRating::Unsatisfactory
        } else if score >= self.poor {
            WotRating::Poor
        } else {
            WotRating::VeryPoor
        }
    }
}

/// Normalizes a raw 0 to 100 WOT score.
pub fn wot_score(raw: f64) -> Option<f64> {
    (0.0..=100.0).contains(&raw).then(|| raw / 100.0)
}

/// Fraction of blacklists that did not flag the domain.
pub fn vt_score(safe: u32, total: u32) -> Option<f64> {
    (total > 0 && safe <= total).then(|| safe as f64 / total as f64)
}

/// Red flags bucketed three at a time: 0 for 0..=2 red flags, 1 for 3..=5
/// and so on.
pub fn vt_red_flag_bucket(safe: u32, total: u32) -> u32 {
    total.saturating_sub(safe) / 3
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrustScore {
    pub domain: String,
    pub wot_score: Option<f64>,
    pub wot_rating: Option<WotRating>,
    pub vt_score: Option<f64>,
    pub vt_red_flags: Option<u32>,
}

fn domain_key(raw: &str) -> String {
    registrable_domain(
        raw.trim()
            .trim_end_matches('.')
            .to_ascii_lowercase()
            .as_str(),
    )
}

/// Score files keyed by registrable domain.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    /// Normalized WOT scores.
    pub wot: BTreeMap<String, f64>,
    /// `(safe, total)` VirusTotal flags.
    pub vt: BTreeMap<String, (u32, u32)>,
    pub ranks: BTreeMap<String, u64>,
    pub bands: WotBands,
}

/// Rows of a headerless or headed CSV. A first row whose numeric columns do
/// not parse is taken as a header.
fn csv_rows(text: &str, path: &str, columns: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::ScoreFile {
            path: path.into(),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() < columns {
            return Err(Error::ScoreFile {
                path: path.into(),
                message: format!(
                    "line {line}: expected {columns} columns, found {}",
                    rec.len()
                ),
            });
        }
        let fields: Vec<String> = rec.iter().take(columns).map(str::to_owned).collect();
        let header =
            rows.is_empty() && i == 0 && fields[1..].iter().any(|f| f.parse::<f64>().is_err());
        if !header {
            rows.push((line, fields));
        }
    }
    Ok(rows)
}

fn num<T: std::str::FromStr>(field: &str, path: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::ScoreFile {
        path: path.into(),
        message: format!("line {line}: bad number {field:?}"),
    })
}

impl ScoreTable {
    pub fn parse_wot(&mut self, text: &str, path: &str) -> Result<()> {
        for (line, f) in csv_rows(text, path, 2)? {
            let raw: f64 = num(&f[1], path, line)?;
            let score = wot_score(raw).ok_or_else(|| Error::ScoreFile {
                path: path.into(),
                message: format!("line {line}: WOT score {raw} outside 0..=100"),
            })?;
            self.wot.insert(domain_key(&f[0]), score);
        }
        Ok(())
    }

    pub fn parse_vt(&mut self, text: &str, path: &str) -> Result<()> {
        for (line, f) in csv_rows(text, path, 3)? {
            let safe: u32 = num(&f[1], path, line)?;
            let total: u32 = num(&f[2], path, line)?;
            if vt_score(safe, total).is_none() {
                return Err(Error::ScoreFile {
                    path: path.into(),
                    message: format!("line {line}: {safe} safe of {total} flags"),
                });
            }
            self.vt.insert(domain_key(&f[0]), (safe, total));
        }
        Ok(())
    }

    pub fn parse_ranks(&mut self, text: &str, path: &str) -> Result<()> {
        for (line, f) in csv_rows(text, path, 2)? {
            self.ranks
                .insert(domain_key(&f[0]), num(&f[1], path, line)?);
        }
        Ok(())
    }

    pub fn load_wot(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.parse_wot(&text, &path.display().to_string())
    }

    pub fn load_vt(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.parse_vt(&text, &path.display().to_string())
    }

    pub fn load_ranks(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.parse_ranks(&text, &path.display().to_string())
    }

    pub fn trust(&self, domain: &str) -> TrustScore {
        let wot = self.wot.get(domain).copied();
        let vt = self.vt.get(domain).copied();
        TrustScore {
            domain: domain.to_owned(),
            wot_score: wot,
            wot_rating: wot.map(|s| self.bands.rate(s)),
            vt_score: vt.and_then(|(s, t)| vt_score(s, t)),
            vt_red_flags: vt.map(|(s, t)| t - s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Scorer {
    Wot,
    VirusTotal,
}

/// Which ad cost a curve accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum CostKind {
    Computation,
    Network,
}

impl CostKind {
    fn of(self, c: &DomainCost) -> u64 {
        match self {
            CostKind::Computation => c.computation_time,
            CostKind::Network => c.network_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CdfPoint {
    pub x: f64,
    pub cumulative: f64,
    /// Number of items sharing this x.
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CdfSeries {
    pub metric: String,
    pub cost: CostKind,
    pub points: Vec<CdfPoint>,
    pub matched_domains: usize,
    /// Domains without a score, excluded from the curve.
    pub unmatched: Vec<String>,
    /// Share of the total cost held by unmatched domains.
    pub unmatched_cost_share: f64,
}

/// Accumulates `(key, cost)` items in key order. Equal keys collapse into one
/// point; the curve is normalized by the total cost of the items.
fn cumulate(mut items: Vec<(f64, u64, Option<String>)>, descending: bool) -> Vec<CdfPoint> {
    items.sort_by(|a, b| {
        let o = a.0.total_cmp(&b.0);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    let total: u64 = items.iter().map(|i| i.1).sum();
    let mut points: Vec<CdfPoint> = Vec::new();
    let mut running = 0u64;
    for (x, cost, band) in items {
        running += cost;
        let cumulative = if total == 0 {
            0.0
        } else {
            running as f64 / total as f64
        };
        match points.last_mut() {
            Some(p) if p.x == x => {
                p.cumulative = cumulative;
                p.count += 1;
            }
            _ => points.push(CdfPoint {
                x,
                cumulative,
                count: 1,
                band,
            }),
        }
    }
    points
}

fn series(
    metric: &str,
    costs: &[DomainCost],
    cost: CostKind,
    descending: bool,
    key: impl Fn(&DomainCost) -> Option<(f64, Option<String>)>,
) -> CdfSeries {
    let mut items = Vec::new();
    let mut unmatched = Vec::new();
    let mut unmatched_cost = 0u64;
    for c in costs {
        match key(c) {
            Some((x, band)) => items.push((x, cost.of(c), band)),
            None => {
                unmatched.push(c.domain.clone());
                unmatched_cost += cost.of(c);
            }
        }
    }
    let total: u64 = costs.iter().map(|c| cost.of(c)).sum();
    unmatched.sort();
    CdfSeries {
        metric: metric.to_owned(),
        cost,
        matched_domains: items.len(),
        points: cumulate(items, descending),
        unmatched,
        unmatched_cost_share: if total == 0 {
            0.0
        } else {
            unmatched_cost as f64 / total as f64
        },
    }
}

/// Cumulative ad cost over domains in descending score order.
pub fn trust_cdf(
    costs: &[DomainCost],
    scores: &ScoreTable,
    scorer: Scorer,
    cost: CostKind,
) -> CdfSeries {
    match scorer {
        Scorer::Wot => series("wot", costs, cost, true, |c| {
            let s = *scores.wot.get(&c.domain)?;
            Some((s, Some(scores.bands.rate(s).to_string())))
        }),
        Scorer::VirusTotal => series("virustotal", costs, cost, true, |c| {
            let (safe, total) = *scores.vt.get(&c.domain)?;
            let b = vt_red_flag_bucket(safe, total);
            Some((
                vt_score(safe, total)?,
                Some(format!("red {}-{}", 3 * b, 3 * b + 2)),
            ))
        }),
    }
}

/// Cumulative ad cost by referrer count (most referred first) and, when a
/// rank file is loaded, by rank (best rank first).
pub fn popularity_cdf(
    costs: &[DomainCost],
    scores: &ScoreTable,
    cost: CostKind,
) -> (CdfSeries, Option<CdfSeries>) {
    let by_referrers = series("referrers", costs, cost, true, |c| {
        Some((c.referrer_count as f64, None))
    });
    let by_rank = (!scores.ranks.is_empty()).then(|| {
        series("rank", costs, cost, false, |c| {
            Some((*scores.ranks.get(&c.domain)? as f64, None))
        })
    });
    (by_referrers, by_rank)
}

/// Empirical distribution of per-page values: the share of values at or
/// below each distinct value.
pub fn fraction_cdf(values: &[f64]) -> Vec<CdfPoint> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, x) in v.into_iter().enumerate() {
        let cumulative = (i + 1) as f64 / n as f64;
        match points.last_mut() {
            Some(p) if p.x == x => {
                p.cumulative = cumulative;
                p.count += 1;
            }
            _ => points.push(CdfPoint {
                x,
                cumulative,
                count: 1,
                band: None,
            }),
        }
    }
    points
}

/// Median; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some((v[n / 2 - 1] + v[n / 2]) / 2.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost(domain: &str, comp: u64, referrers: u64) -> DomainCost {
        DomainCost {
            domain: domain.into(),
            computation_time: comp,
            network_time: 0,
            computation_share: 0.0,
            network_share: 0.0,
            referrer_count: referrers,
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(wot_score(85.0), Some(0.85));
        assert_eq!(WotBands::default().rate(0.85), WotRating::Excellent);
        assert_eq!(WotBands::default().rate(0.6), WotRating::Good);
        assert_eq!(WotBands::default().rate(0.1), WotRating::VeryPoor);
        assert_eq!(wot_score(101.0), None);
        assert!((vt_score(68, 71).unwrap() - 0.957746).abs() < 1e-6);
        assert_eq!(vt_red_flag_bucket(68, 71), 1);
        assert_eq!(vt_red_flag_bucket(69, 71), 0);
        assert_eq!(vt_score(3, 0), None);
    }

    #[test]
    fn popularity_ordering() {
        let costs = vec![
            cost("c.com", 20, 1),
            cost("a.com", 50, 10),
            cost("b.com", 30, 5),
        ];
        let (by_ref, by_rank) =
            popularity_cdf(&costs, &ScoreTable::default(), CostKind::Computation);
        let ys: Vec<f64> = by_ref.points.iter().map(|p| p.cumulative).collect();
        assert_eq!(ys, vec![0.5, 0.8, 1.0]);
        assert!(by_rank.is_none());
    }

    #[test]
    fn all_equal_scores_is_one_step() {
        let costs = vec![cost("a.com", 1, 1), cost("b.com", 2, 1)];
        let mut t = ScoreTable::default();
        t.parse_wot("a.com,100\nb.com,100\n", "wot.csv").unwrap();
        let s = trust_cdf(&costs, &t, Scorer::Wot, CostKind::Computation);
        assert_eq!(s.points.len(), 1);
        assert_eq!(
            (s.points[0].x, s.points[0].cumulative, s.points[0].count),
            (1.0, 1.0, 2)
        );
    }

    #[test]
    fn unmatched_are_excluded() {
        let costs = vec![cost("a.com", 10, 1), cost("b.com", 30, 1)];
        let mut t = ScoreTable::default();
        t.parse_vt("domain,safeFlags,totalFlags\nA.com,68,71\n", "vt.csv")
            .unwrap();
        let s = trust_cdf(&costs, &t, Scorer::VirusTotal, CostKind::Computation);
        assert_eq!(s.unmatched, vec!["b.com".to_string()]);
        assert_eq!(s.unmatched_cost_share, 0.75);
        assert_eq!(s.points[0].cumulative, 1.0);
        assert_eq!(s.points[0].band.as_deref(), Some("red 3-5"));
    }

    #[test]
    fn score_file_errors() {
        let mut t = ScoreTable::default();
        assert!(t.parse_wot("a.com,abc\nb.com,x\n", "wot.csv").is_err());
        assert!(t.parse_vt("a.com,72,71\n", "vt.csv").is_err());
        assert!(t.parse_ranks("a.com\n", "ranks.csv").is_err());
        t.parse_ranks("# comment\nsub.a.com,3\n", "ranks.csv")
            .unwrap();
        assert_eq!(t.ranks.get("a.com"), Some(&3));
    }

    #[test]
    fn fraction_cdf_steps_and_median() {
        let p = fraction_cdf(&[0.3, 0.1, 0.2, 0.4]);
        let xy: Vec<(f64, f64)> = p.iter().map(|p| (p.x, p.cumulative)).collect();
        assert_eq!(xy, vec![(0.1, 0.25), (0.2, 0.5), (0.3, 0.75), (0.4, 1.0)]);
        assert_eq!(fraction_cdf(&[0.5, 0.5]).len(), 1);
        assert_eq!(median(&[0.10, 0.15, 0.30]), Some(0.15));
        assert_eq!(median(&[1.0, 2.0]), Some(1.5));
        assert_eq!(median(&[]), None);
    }
}
