//! Ad classification with Adblock-syntax filter lists.
//!
//! Matching is passive: it runs over the recorded network log after the
//! fact. Rules are sharded by a literal token so each URL is checked only
//! against rules whose token it contains; the sharded lookup returns exactly
//! what a scan over every rule would.

mod pattern;
mod rule;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use url::Url;

pub use rule::{parse_lines, parse_rule, FilterRule, RequestType, RuleOptions, Skip};

use crate::domain::{registrable_domain, url_domain};
use crate::error::{Error, Result};
use crate::ingest::{ContentType, NetworkRequest};
use crate::warnings::Warnings;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchContext {
    pub url: Url,
    pub content_type: ContentType,
    /// Host of the page under test, used by `domain=` options.
    pub page_host: String,
    pub page_domain: String,
    pub request_domain: String,
}

impl MatchContext {
    pub fn new(url: Url, content_type: ContentType, page_url: &Url) -> MatchContext {
        let page_host = page_url.host_str().unwrap_or("").to_ascii_lowercase();
        MatchContext {
            page_domain: registrable_domain(&page_host),
            request_domain: url_domain(&url),
            page_host,
            url,
            content_type,
        }
    }

    pub fn is_third_party(&self) -> bool {
        self.page_domain != self.request_domain
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchResult {
    pub is_ad: bool,
    /// First blocking rule (in list order) that matched.
    pub matched_rule: Option<String>,
    /// First exception rule that overrode the block.
    pub exception_rule: Option<String>,
}

fn is_token_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'%'
}

/// Lowercased maximal runs of token bytes.
fn url_tokens(url: &str) -> Vec<String> {
    let mut tokens: Vec<String> = url
        .as_bytes()
        .split(|&b| !is_token_byte(b))
        .filter(|t| !t.is_empty())
        .map(|t| String::from_utf8_lossy(t).to_ascii_lowercase())
        .collect();
    tokens.sort();
    tokens.dedup();
    tokens
}

/// Tokens of a rule that any matching URL must contain as a whole token:
/// runs bounded on both sides by a literal non-token byte, a `^`, or an
/// anchor. Runs touching `*` or an unanchored edge may be partial.
fn rule_tokens(rule: &FilterRule) -> Vec<String> {
    let p = rule.pattern.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < p.len() {
        if !is_token_byte(p[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < p.len() && is_token_byte(p[i]) {
            i += 1;
        }
        let left_ok = if start == 0 {
            rule.anchor_start || rule.domain_anchor
        } else {
            p[start - 1] != b'*'
        };
        let right_ok = if i == p.len() {
            rule.anchor_end
        } else {
            p[i] != b'*'
        };
        if left_ok && right_ok {
            out.push(String::from_utf8_lossy(&p[start..i]).to_ascii_lowercase());
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
struct TokenIndex {
    shards: HashMap<String, Vec<usize>>,
    untokenized: Vec<usize>,
}

impl TokenIndex {
    fn insert(&mut self, id: usize, rule: &FilterRule) {
        let best = rule_tokens(rule).into_iter().min_by(|a, b| {
            let la = self.shards.get(a).map_or(0, Vec::len);
            let lb = self.shards.get(b).map_or(0, Vec::len);
            la.cmp(&lb).then(b.len().cmp(&a.len()))
        });
        match best {
            Some(tok) => self.shards.entry(tok).or_default().push(id),
            None => self.untokenized.push(id),
        }
    }

    fn candidates(&self, tokens: &[String]) -> Vec<usize> {
        let mut ids: Vec<usize> = self.untokenized.clone();
        for t in tokens {
            if let Some(shard) = self.shards.get(t) {
                ids.extend_from_slice(shard);
            }
        }
        ids.sort_unstable();
        ids
    }
}

fn rule_matches(rule: &FilterRule, ctx: &MatchContext, rt: RequestType, third_party: bool) -> bool {
    rule.options.matches(rt, third_party, &ctx.page_host)
        && rule.compiled.is_match(ctx.url.as_str())
}

/// Parsed and indexed filter rules. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    blocking: Vec<FilterRule>,
    exceptions: Vec<FilterRule>,
    blocking_index: TokenIndex,
    exception_index: TokenIndex,
    /// SHA-256 over every list appended, in order.
    digest: Sha256,
    pub warnings: Warnings,
}

impl RuleSet {
    pub fn parse(text: &str) -> RuleSet {
        let mut rs = RuleSet::default();
        rs.append(text);
        rs
    }

    /// Loads and appends several lists in order.
    pub fn load<P: AsRef<Path>>(paths: &[P]) -> Result<RuleSet> {
        let mut rs = RuleSet::default();
        for p in paths {
            let p = p.as_ref();
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            rs.append(&text);
        }
        Ok(rs)
    }

    /// Appends a list; its rules come after those already loaded.
    pub fn append(&mut self, text: &str) {
        self.digest.update(text.as_bytes());
        for rule in parse_lines(text.lines(), &mut self.warnings) {
            if rule.is_exception {
                self.exception_index.insert(self.exceptions.len(), &rule);
                self.exceptions.push(rule);
            } else {
                self.blocking_index.insert(self.blocking.len(), &rule);
                self.blocking.push(rule);
            }
        }
    }

    pub fn blocking_rules(&self) -> &[FilterRule] {
        &self.blocking
    }

    pub fn exception_rules(&self) -> &[FilterRule] {
        &self.exceptions
    }

    pub fn len(&self) -> usize {
        self.blocking.len() + self.exceptions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hex SHA-256 of the loaded list text, recorded in reports so results
    /// can be tied to a list snapshot.
    pub fn sha256(&self) -> String {
        let d = self.digest.clone().finalize();
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Classifies one URL using the token index.
pub fn match_url(ctx: &MatchContext, rules: &RuleSet) -> MatchResult {
    let rt = RequestType::from(ctx.content_type);
    let third_party = ctx.is_third_party();
    let tokens = url_tokens(ctx.url.as_str());
    let first = |index: &TokenIndex, list: &[FilterRule]| {
        index
            .candidates(&tokens)
            .into_iter()
            .map(|i| &list[i])
            .find(|r| rule_matches(r, ctx, rt, third_party))
            .map(|r| r.raw.clone())
    };
    finish(first(&rules.blocking_index, &rules.blocking), || {
        first(&rules.exception_index, &rules.exceptions)
    })
}

/// Classifies one URL by checking every rule in order.
pub fn match_url_naive(ctx: &MatchContext, rules: &RuleSet) -> MatchResult {
    let rt = RequestType::from(ctx.content_type);
    let third_party = ctx.is_third_party();
    let first = |list: &[FilterRule]| {
        list.iter()
            .find(|r| rule_matches(r, ctx, rt, third_party))
            .map(|r| r.raw.clone())
    };
    finish(first(&rules.blocking), || first(&rules.exceptions))
}

fn finish(blocked: Option<String>, exception: impl FnOnce() -> Option<String>) -> MatchResult {
    match blocked {
        None => MatchResult::default(),
        Some(rule) => match exception() {
            Some(ex) => MatchResult {
                is_ad: false,
                matched_rule: Some(rule),
                exception_rule: Some(ex),
            },
            None => MatchResult {
                is_ad: true,
                matched_rule: Some(rule),
                exception_rule: None,
            },
        },
    }
}

/// One fetched resource, keyed by URL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceRecord {
    pub url: Url,
    pub domain: String,
    pub content_type: ContentType,
    pub is_ad: bool,
    pub matched_rule: Option<String>,
    /// `(start, end)` of every fetch of this URL, in log order.
    pub intervals: Vec<(u64, u64)>,
}

impl ResourceRecord {
    pub fn summed_time(&self) -> u64 {
        self.intervals.iter().map(|(s, e)| e - s).sum()
    }
}

/// Classifies every request and folds repeated fetches of a URL into one
/// record. The page context of each request is its recorded first party,
/// falling back to `page_url`.
pub fn classify_resources(
    net: &[NetworkRequest],
    rules: &RuleSet,
    page_url: &Url,
) -> Vec<ResourceRecord> {
    let mut first_seen: BTreeMap<&Url, usize> = BTreeMap::new();
    let mut order: Vec<&NetworkRequest> = Vec::new();
    for r in net {
        if !first_seen.contains_key(&r.url) {
            first_seen.insert(&r.url, order.len());
            order.push(r);
        }
    }
    let verdicts: Vec<MatchResult> = order
        .par_iter()
        .map(|r| {
            let page = r.first_party.as_ref().unwrap_or(page_url);
            match_url(
                &MatchContext::new(r.url.clone(), r.content_type, page),
                rules,
            )
        })
        .collect();

    let mut records: Vec<ResourceRecord> = order
        .iter()
        .zip(verdicts)
        .map(|(r, v)| ResourceRecord {
            url: r.url.clone(),
            domain: url_domain(&r.url),
            content_type: r.content_type,
            is_ad: v.is_ad,
            matched_rule: v.matched_rule.filter(|_| v.is_ad),
            intervals: Vec::new(),
        })
        .collect();
    for r in net {
        records[first_seen[&r.url]]
            .intervals
            .push((r.start_time, r.end_time));
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(url: &str, ct: ContentType, page: &str) -> MatchContext {
        MatchContext::new(Url::parse(url).unwrap(), ct, &Url::parse(page).unwrap())
    }

    fn both(c: &MatchContext, rs: &RuleSet) -> MatchResult {
        let fast = match_url(c, rs);
        assert_eq!(fast, match_url_naive(c, rs));
        fast
    }

    #[test]
    fn doubleclick_third_party() {
        let rs = RuleSet::parse("||doubleclick.net^\n");
        let c = ctx(
            "https://ad.doubleclick.net/adj/x",
            ContentType::Script,
            "https://news.example/",
        );
        assert!(c.is_third_party());
        let r = both(&c, &rs);
        assert!(r.is_ad);
        assert_eq!(r.matched_rule.as_deref(), Some("||doubleclick.net^"));
    }

    #[test]
    fn empty_ruleset_never_matches() {
        let rs = RuleSet::parse("");
        assert!(rs.is_empty());
        assert!(
            !both(
                &ctx(
                    "https://ads.com/ad.js",
                    ContentType::Script,
                    "https://a.com/"
                ),
                &rs
            )
            .is_ad
        );
    }

    #[test]
    fn exception_overrides_block() {
        let rs = RuleSet::parse("&ad_box_\n@@||trusted.com/ad_box_ok\n");
        let c = ctx(
            "https://trusted.com/ad_box_ok?x",
            ContentType::Image,
            "https://trusted.com/",
        );
        // The exception matches but the block does not, so nothing to override.
        assert!(!both(&c, &rs).is_ad);

        let c = ctx(
            "https://trusted.com/ad_box_ok?x&ad_box_=1",
            ContentType::Image,
            "https://p.com/",
        );
        let r = both(&c, &rs);
        assert!(!r.is_ad);
        assert_eq!(
            r.exception_rule.as_deref(),
            Some("@@||trusted.com/ad_box_ok")
        );

        let c = ctx(
            "https://other.com/x?a=1&ad_box_=1",
            ContentType::Image,
            "https://p.com/",
        );
        assert!(both(&c, &rs).is_ad);
    }

    #[test]
    fn type_and_party_options() {
        let rs = RuleSet::parse("/ads/*$script,third-party\n||cdn.com^$~image\n");
        let page = "https://site.com/";
        assert!(
            both(
                &ctx("https://x.com/ads/a.js", ContentType::Script, page),
                &rs
            )
            .is_ad
        );
        assert!(
            !both(
                &ctx("https://x.com/ads/a.png", ContentType::Image, page),
                &rs
            )
            .is_ad
        );
        assert!(
            !both(
                &ctx("https://site.com/ads/a.js", ContentType::Script, page),
                &rs
            )
            .is_ad
        );
        assert!(both(&ctx("https://cdn.com/a.js", ContentType::Script, page), &rs).is_ad);
        assert!(!both(&ctx("https://cdn.com/a.png", ContentType::Image, page), &rs).is_ad);
    }

    #[test]
    fn first_rule_in_list_order_is_reported() {
        let rs = RuleSet::parse("/banner/*\n||ads.com^\n");
        let r = both(
            &ctx(
                "https://ads.com/banner/1.png",
                ContentType::Image,
                "https://p.com/",
            ),
            &rs,
        );
        assert_eq!(r.matched_rule.as_deref(), Some("/banner/*"));
    }

    #[test]
    fn tokens() {
        let r = parse_rule("||doubleclick.net^").unwrap();
        assert_eq!(rule_tokens(&r), vec!["doubleclick", "net"]);
        let r = parse_rule("&ad_box_").unwrap();
        assert_eq!(rule_tokens(&r), vec!["ad", "box"]);
        let r = parse_rule("ads*banner").unwrap();
        assert!(rule_tokens(&r).is_empty());
        let r = parse_rule("|http://ad").unwrap();
        assert_eq!(rule_tokens(&r), vec!["http"]);
        assert_eq!(
            url_tokens("https://A.com/a?x=A"),
            vec!["a", "com", "https", "x"]
        );
    }

    #[test]
    fn classify_aggregates_repeat_fetches() {
        let rs = RuleSet::parse("||ads.net^\n");
        let mk = |id: &str, url: &str, s: u64, e: u64| NetworkRequest {
            request_id: id.into(),
            url: Url::parse(url).unwrap(),
            method: "GET".into(),
            content_type: ContentType::Script,
            start_time: s,
            end_time: e,
            frame_id: None,
            first_party: None,
        };
        let net = vec![
            mk("1", "https://pub.com/", 0, 10),
            mk("2", "https://ads.net/a.js", 10, 30),
            mk("3", "https://ads.net/a.js", 40, 45),
        ];
        let recs = classify_resources(&net, &rs, &Url::parse("https://pub.com/").unwrap());
        assert_eq!(recs.len(), 2);
        assert!(!recs[0].is_ad);
        assert!(recs[1].is_ad);
        assert_eq!(recs[1].intervals, vec![(10, 30), (40, 45)]);
        assert_eq!(recs[1].summed_time(), 25);
        assert_eq!(recs[1].domain, "ads.net");
    }

    #[test]
    fn digest_tracks_appended_lists() {
        let a = RuleSet::parse("||a.com^\n");
        let mut b = RuleSet::parse("||a.com^\n");
        assert_eq!(a.sha256(), b.sha256());
        b.append("||b.com^\n");
        assert_ne!(a.sha256(), b.sha256());
        assert_eq!(a.sha256().len(), 64);
    }
}
