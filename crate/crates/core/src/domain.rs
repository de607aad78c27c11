//! Registrable-domain (eTLD+1) helpers backed by the public suffix list
//! compiled into the `psl` crate. The crate version is pinned in the lock
//! file, which pins the suffix snapshot.

use url::Url;

/// Returns the registrable domain of `host`, lowercased.
///
/// Hosts that are themselves public suffixes, IP literals, or single-label
/// names are returned unchanged.
pub fn registrable_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok() || host.starts_with('[') {
        return host;
    }
    match psl::domain_str(&host) {
        Some(d) => d.to_owned(),
        None => host,
    }
}

/// Registrable domain of a URL's host. URLs without a host (e.g. `data:`)
/// fall back to their scheme so they still group deterministically.
pub fn url_domain(url: &Url) -> String {
    match url.host_str() {
        Some(h) => registrable_domain(h),
        None => url.scheme().to_owned(),
    }
}

/// Parses an absolute URL, returning `None` for relative or malformed input.
pub fn parse_absolute(raw: &str) -> Option<Url> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    Url::parse(raw).ok()
}
