//! Flat CSV tables for external plotting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{CorpusReport, PageReport};
use crate::error::{Error, Result};
use crate::metrics::{CdfPoint, ContentTypeMetrics, DomainCost, StageMetrics};

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| std::io::Error::other(e.to_string()))
        .and_then(|mut inner| inner.flush())
        .map_err(|e| Error::io("<csv>", e))
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", e.into())
}

/// Two columns: `x,cumulative`.
pub fn write_cdf_csv<W: Write>(out: W, points: &[CdfPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "cumulative"]).map_err(csv_err)?;
    for p in points {
        w.write_record([f(p.x), f(p.cumulative)]).map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_stage_csv<W: Write>(out: W, m: &StageMetrics) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "stage",
        "ct_ad",
        "ct_total",
        "ct_unattributed",
        "r1",
        "r2",
        "r3",
    ])
    .map_err(csv_err)?;
    for r in &m.rows {
        w.write_record([
            r.stage.label().to_owned(),
            r.ct_ad.to_string(),
            r.ct_total.to_string(),
            r.ct_unattributed.to_string(),
            f(r.r1.value),
            f(r.r2.value),
            f(r.r3.value),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_content_type_csv<W: Write>(out: W, m: &ContentTypeMetrics) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "content_type",
        "nr_ad",
        "nr_total",
        "nt_ad",
        "nt_total",
        "nr_ad/nr_type",
        "nr_ad/nr_ads",
        "nr_type/nr_all",
        "nt_ad/nt_type",
        "nt_ad/nt_ads",
        "nt_type/nt_all",
    ])
    .map_err(csv_err)?;
    for r in &m.rows {
        w.write_record([
            r.content_type.label().to_owned(),
            r.nr_ad.to_string(),
            r.nr_total.to_string(),
            r.nt_ad.to_string(),
            r.nt_total.to_string(),
            f(r.nr_ad_over_type.value),
            f(r.nr_ad_over_ads.value),
            f(r.nr_type_over_all.value),
            f(r.nt_ad_over_type.value),
            f(r.nt_ad_over_ads.value),
            f(r.nt_type_over_all.value),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_domain_csv<W: Write>(out: W, costs: &[DomainCost]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "domain",
        "computation_time",
        "network_time",
        "computation_share",
        "network_share",
        "referrer_count",
    ])
    .map_err(csv_err)?;
    for c in costs {
        w.write_record([
            c.domain.clone(),
            c.computation_time.to_string(),
            c.network_time.to_string(),
            f(c.computation_share),
            f(c.network_share),
            c.referrer_count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `stages.csv`, `content_types.csv` and `domains.csv` for one page.
pub fn write_page_csv_dir(dir: &Path, page: &PageReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_stage_csv(create(dir, "stages.csv")?, &page.stage_metrics)?;
    write_content_type_csv(create(dir, "content_types.csv")?, &page.content_types)?;
    write_domain_csv(create(dir, "domains.csv")?, &page.domain_costs)
}

/// Writes per-mode tables and distributions, the domain table, and one file
/// per trust or popularity curve.
pub fn write_corpus_csv_dir(dir: &Path, report: &CorpusReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (mode, section) in &report.corpus.modes {
        let m = mode.label();
        write_cdf_csv(
            create(dir, &format!("{m}_computation_cdf.csv"))?,
            &section.computation_cdf,
        )?;
        write_cdf_csv(
            create(dir, &format!("{m}_network_cdf.csv"))?,
            &section.network_cdf,
        )?;
        write_stage_csv(
            create(dir, &format!("{m}_stages.csv"))?,
            &section.stage_metrics,
        )?;
        write_content_type_csv(
            create(dir, &format!("{m}_content_types.csv"))?,
            &section.content_types,
        )?;
    }
    write_domain_csv(create(dir, "domains.csv")?, &report.corpus.domain_costs)?;
    for s in report.corpus.trust.iter().chain(&report.corpus.popularity) {
        let cost = match s.cost {
            crate::metrics::CostKind::Computation => "computation",
            crate::metrics::CostKind::Network => "network",
        };
        write_cdf_csv(
            create(dir, &format!("{}_{cost}_cdf.csv", s.metric))?,
            &s.points,
        )?;
    }
    Ok(())
}
