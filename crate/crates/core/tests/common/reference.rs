//! Regex-based Adblock matcher used as an oracle. Each rule becomes one
//! anchored regular expression; options are checked separately.

use adlens::ingest::ContentType;
use regex::Regex;

#[derive(Debug)]
pub struct RefRule {
    pub raw: String,
    re: Regex,
    exception: bool,
    types: Option<Vec<String>>,
    not_types: Vec<String>,
    third_party: Option<bool>,
    domains: Vec<String>,
    not_domains: Vec<String>,
}

const KNOWN_TYPES: &[&str] = &[
    "script",
    "image",
    "stylesheet",
    "xmlhttprequest",
    "subdocument",
    "media",
    "font",
    "other",
    "object",
    "object-subrequest",
    "ping",
    "websocket",
    "webrtc",
    "beacon",
];

fn canonical_type(name: &str) -> &str {
    match name {
        "css" => "stylesheet",
        "xhr" => "xmlhttprequest",
        "frame" => "subdocument",
        other => other,
    }
}

fn type_name(ct: ContentType) -> &'static str {
    match ct {
        ContentType::Script => "script",
        ContentType::Image => "image",
        ContentType::Css => "stylesheet",
        ContentType::Xhr => "xmlhttprequest",
        ContentType::Html => "subdocument",
        ContentType::Media => "media",
        ContentType::Font => "font",
        ContentType::Xml | ContentType::Unknown => "other",
    }
}

fn to_regex(body: &str) -> String {
    let (mut re, rest) = if let Some(r) = body.strip_prefix("||") {
        // Scheme, then optionally any subdomain labels of the host.
        let cut = r.find(|c| "/^*?:".contains(c)).unwrap_or(r.len());
        (
            String::from(r"^[a-zA-Z][a-zA-Z0-9+.\-]*://(?:[^/?#]*\.)?"),
            format!("{}{}", r[..cut].to_ascii_lowercase(), &r[cut..]),
        )
    } else if let Some(r) = body.strip_prefix('|') {
        (String::from("^"), r.to_owned())
    } else {
        (String::new(), body.to_owned())
    };
    let (rest, end) = match rest.strip_suffix('|') {
        Some(r) => (r.to_owned(), true),
        None => (rest, false),
    };
    for c in rest.chars() {
        match c {
            '*' => re.push_str(".*"),
            '^' => re.push_str(r"(?:[^a-zA-Z0-9_.%\-]|$)"),
            c => re.push_str(&regex::escape(&c.to_string())),
        }
    }
    if end {
        re.push('$');
    }
    re
}

/// Parses a network rule; `None` for comments, cosmetic and regex rules.
pub fn parse(line: &str) -> Option<RefRule> {
    let line = line.trim();
    if line.is_empty()
        || line.starts_with('!')
        || line.starts_with('[')
        || line.contains("##")
        || line.contains("#@#")
    {
        return None;
    }
    let (exception, body) = match line.strip_prefix("@@") {
        Some(b) => (true, b),
        None => (false, line),
    };
    let (pattern, opts) = match body.rfind('$') {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    if pattern.len() > 1 && pattern.starts_with('/') && pattern.ends_with('/') {
        return None;
    }
    let mut rule = RefRule {
        raw: line.to_owned(),
        re: Regex::new(&to_regex(pattern)).unwrap(),
        exception,
        types: None,
        not_types: Vec::new(),
        third_party: None,
        domains: Vec::new(),
        not_domains: Vec::new(),
    };
    for opt in opts.into_iter().flat_map(|o| o.split(',')) {
        let opt = opt.trim().to_ascii_lowercase();
        if let Some(list) = opt.strip_prefix("domain=") {
            for d in list.split('|') {
                match d.strip_prefix('~') {
                    Some(d) => rule.not_domains.push(d.to_owned()),
                    None => rule.domains.push(d.to_owned()),
                }
            }
            continue;
        }
        let (neg, name) = match opt.strip_prefix('~') {
            Some(n) => (true, n),
            None => (false, opt.as_str()),
        };
        match name {
            "third-party" => rule.third_party = Some(!neg),
            "first-party" => rule.third_party = Some(neg),
            t if KNOWN_TYPES.contains(&canonical_type(t)) => {
                let t = canonical_type(t).to_owned();
                if neg {
                    rule.not_types.push(t);
                } else {
                    rule.types.get_or_insert_with(Vec::new).push(t);
                }
            }
            // Options outside the supported set disable the rule.
            _ => return None,
        }
    }
    Some(rule)
}

fn host(url: &str) -> String {
    url::Url::parse(url)
        .unwrap()
        .host_str()
        .unwrap_or("")
        .to_owned()
}

fn site(host: &str) -> String {
    psl::domain_str(host).unwrap_or(host).to_owned()
}

fn on_domain(page_host: &str, d: &str) -> bool {
    page_host == d || page_host.ends_with(&format!(".{d}"))
}

impl RefRule {
    pub fn matches(&self, url: &str, ct: ContentType, page: &str) -> bool {
        let t = type_name(ct);
        if let Some(types) = &self.types {
            if !types.iter().any(|x| x == t) {
                return false;
            }
        }
        if self.not_types.iter().any(|x| x == t) {
            return false;
        }
        let page_host = host(page);
        if let Some(tp) = self.third_party {
            if tp != (site(&host(url)) != site(&page_host)) {
                return false;
            }
        }
        if self.not_domains.iter().any(|d| on_domain(&page_host, d)) {
            return false;
        }
        if !self.domains.is_empty() && !self.domains.iter().any(|d| on_domain(&page_host, d)) {
            return false;
        }
        self.re.is_match(url)
    }
}

/// Blocked by some rule and not rescued by any exception.
pub fn is_ad(rules: &[RefRule], url: &str, ct: ContentType, page: &str) -> bool {
    let hit = |ex: bool| {
        rules
            .iter()
            .filter(|r| r.exception == ex)
            .any(|r| r.matches(url, ct, page))
    };
    hit(false) && !hit(true)
}
