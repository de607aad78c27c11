//! Adblock-syntax network rule parsing.

use std::collections::BTreeSet;

use serde::Serialize;

use super::pattern::Pattern;
use crate::ingest::ContentType;
use crate::warnings::{self, Warnings};

/// Request types a rule option can name that exist in our content-type
/// universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RequestType {
    Script,
    Image,
    Stylesheet,
    XmlHttpRequest,
    Subdocument,
    Media,
    Font,
    Other,
}

impl From<ContentType> for RequestType {
    fn from(ct: ContentType) -> Self {
        match ct {
            ContentType::Script => RequestType::Script,
            ContentType::Image => RequestType::Image,
            ContentType::Css => RequestType::Stylesheet,
            ContentType::Xhr => RequestType::XmlHttpRequest,
            ContentType::Html => RequestType::Subdocument,
            ContentType::Media => RequestType::Media,
            ContentType::Font => RequestType::Font,
            ContentType::Xml | ContentType::Unknown => RequestType::Other,
        }
    }
}

fn request_type(name: &str) -> Option<RequestType> {
    Some(match name {
        "script" => RequestType::Script,
        "image" => RequestType::Image,
        "stylesheet" | "css" => RequestType::Stylesheet,
        "xmlhttprequest" | "xhr" => RequestType::XmlHttpRequest,
        "subdocument" | "frame" => RequestType::Subdocument,
        "media" => RequestType::Media,
        "font" => RequestType::Font,
        "other" => RequestType::Other,
        _ => return None,
    })
}

/// Type options for requests we never observe. Naming them narrows the
/// rule's type set to nothing we can see; it does not make the rule invalid.
const FOREIGN_TYPES: &[&str] = &[
    "object",
    "object-subrequest",
    "ping",
    "websocket",
    "webrtc",
    "beacon",
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleOptions {
    /// Positive type options; `None` means every type.
    pub include_types: Option<BTreeSet<RequestType>>,
    pub exclude_types: BTreeSet<RequestType>,
    /// `Some(true)` for `third-party`, `Some(false)` for `~third-party`.
    pub third_party: Option<bool>,
    pub include_domains: Vec<String>,
    pub exclude_domains: Vec<String>,
}

fn host_matches(host: &str, domain: &str) -> bool {
    host == domain
        || (host.len() > domain.len()
            && host.ends_with(domain)
            && host.as_bytes()[host.len() - domain.len() - 1] == b'.')
}

impl RuleOptions {
    pub fn matches(&self, rt: RequestType, third_party: bool, page_host: &str) -> bool {
        if let Some(include) = &self.include_types {
            if !include.contains(&rt) {
                return false;
            }
        }
        if self.exclude_types.contains(&rt) {
            return false;
        }
        if let Some(want) = self.third_party {
            if want != third_party {
                return false;
            }
        }
        if self
            .exclude_domains
            .iter()
            .any(|d| host_matches(page_host, d))
        {
            return false;
        }
        self.include_domains.is_empty()
            || self
                .include_domains
                .iter()
                .any(|d| host_matches(page_host, d))
    }
}

/// Why a line did not produce a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skip {
    Blank,
    Comment,
    Cosmetic,
    Regex,
    UnsupportedOption,
    Unparseable,
}

impl Skip {
    pub fn warning_code(self) -> Option<&'static str> {
        match self {
            Skip::Blank | Skip::Comment => None,
            Skip::Cosmetic => Some(warnings::FILTER_COSMETIC),
            Skip::Regex => Some(warnings::FILTER_REGEX),
            Skip::UnsupportedOption => Some(warnings::FILTER_UNSUPPORTED_OPTION),
            Skip::Unparseable => Some(warnings::FILTER_UNPARSEABLE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FilterRule {
    /// Pattern body without anchors or options.
    pub pattern: String,
    pub anchor_start: bool,
    pub anchor_end: bool,
    pub domain_anchor: bool,
    pub is_exception: bool,
    pub options: RuleOptions,
    pub raw: String,
    #[serde(skip)]
    pub(crate) compiled: Pattern,
}

const COSMETIC_MARKERS: &[&str] = &["##", "#@#", "#?#", "#@?#", "#$#", "#@$#", "#%#", "#@%#"];

fn parse_options(text: &str) -> Result<RuleOptions, Skip> {
    let mut opts = RuleOptions::default();
    let mut include = BTreeSet::new();
    let mut named_foreign = false;
    for opt in text.split(',').map(str::trim) {
        if opt.is_empty() {
            return Err(Skip::Unparseable);
        }
        let (negated, name) = match opt.strip_prefix('~') {
            Some(rest) => (true, rest),
            None => (false, opt),
        };
        let name_lc = name.to_ascii_lowercase();
        if let Some(rt) = request_type(&name_lc) {
            if negated {
                opts.exclude_types.insert(rt);
            } else {
                include.insert(rt);
            }
        } else if FOREIGN_TYPES.contains(&name_lc.as_str()) {
            named_foreign |= !negated;
        } else if name_lc == "third-party" || name_lc == "3p" {
            opts.third_party = Some(!negated);
        } else if name_lc == "first-party" || name_lc == "1p" {
            opts.third_party = Some(negated);
        } else if let Some(list) = name_lc.strip_prefix("domain=") {
            if negated {
                return Err(Skip::Unparseable);
            }
            for d in list.split('|').map(str::trim) {
                match d.strip_prefix('~') {
                    Some(ex) if !ex.is_empty() => opts.exclude_domains.push(ex.to_owned()),
                    None if !d.is_empty() => opts.include_domains.push(d.to_owned()),
                    _ => return Err(Skip::Unparseable),
                }
            }
        } else {
            return Err(Skip::UnsupportedOption);
        }
    }
    if !include.is_empty() {
        opts.include_types = Some(include);
    } else if named_foreign {
        // Only foreign types named: can never match anything we classify.
        return Err(Skip::UnsupportedOption);
    }
    Ok(opts)
}

/// Lowercases the host portion of a pattern so host matching is
/// case-insensitive while paths stay case-sensitive.
fn lowercase_host(pattern: &str, domain_anchor: bool) -> String {
    let host_start = if domain_anchor {
        Some(0)
    } else {
        pattern.find("://").map(|i| i + 3)
    };
    match host_start {
        None => pattern.to_owned(),
        Some(start) => {
            let rest = &pattern[start..];
            let end = rest
                .find(['/', '^', '*', '?', '|', ':'])
                .map_or(pattern.len(), |i| start + i);
            let mut out = String::with_capacity(pattern.len());
            out.push_str(&pattern[..start]);
            out.push_str(&pattern[start..end].to_ascii_lowercase());
            out.push_str(&pattern[end..]);
            out
        }
    }
}

/// Parses one filter-list line.
pub fn parse_rule(line: &str) -> Result<FilterRule, Skip> {
    let raw = line.trim();
    if raw.is_empty() {
        return Err(Skip::Blank);
    }
    if raw.starts_with('!') || (raw.starts_with('[') && raw.ends_with(']')) {
        return Err(Skip::Comment);
    }
    if COSMETIC_MARKERS.iter().any(|m| raw.contains(m)) {
        return Err(Skip::Cosmetic);
    }

    let (is_exception, body) = match raw.strip_prefix("@@") {
        Some(rest) => (true, rest),
        None => (false, raw),
    };
    if body.len() > 1 && body.starts_with('/') && body.ends_with('/') {
        return Err(Skip::Regex);
    }
    let (body, options) = match body.rfind('$') {
        Some(i) => (&body[..i], parse_options(&body[i + 1..])?),
        None => (body, RuleOptions::default()),
    };
    if body.len() > 1 && body.starts_with('/') && body.ends_with('/') {
        return Err(Skip::Regex);
    }

    let (domain_anchor, anchor_start, rest) = if let Some(r) = body.strip_prefix("||") {
        (true, false, r)
    } else if let Some(r) = body.strip_prefix('|') {
        (false, true, r)
    } else {
        (false, false, body)
    };
    let (anchor_end, rest) = match rest.strip_suffix('|') {
        Some(r) => (true, r),
        None => (false, rest),
    };
    if rest.is_empty() || rest.contains('|') {
        return Err(Skip::Unparseable);
    }
    let pattern = lowercase_host(rest, domain_anchor);
    let compiled = Pattern::compile(&pattern, anchor_start, anchor_end, domain_anchor);
    Ok(FilterRule {
        pattern,
        anchor_start,
        anchor_end,
        domain_anchor,
        is_exception,
        options,
        raw: raw.to_owned(),
        compiled,
    })
}

/// Parses a whole list, counting skipped lines.
pub fn parse_lines<'a>(
    lines: impl IntoIterator<Item = &'a str>,
    warnings: &mut Warnings,
) -> Vec<FilterRule> {
    let mut rules = Vec::new();
    for line in lines {
        match parse_rule(line) {
            Ok(rule) => rules.push(rule),
            Err(skip) => {
                if let Some(code) = skip.warning_code() {
                    warnings.bump(code);
                }
            }
        }
    }
    rules
}
