use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use url::Url;

use crate::domain::parse_absolute;
use crate::warnings::{self, Warnings};

/// Closed set of resource content types used throughout the network tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContentType {
    Script,
    #[serde(rename = "HTML")]
    Html,
    Image,
    Font,
    #[serde(rename = "CSS")]
    Css,
    #[serde(rename = "XML")]
    Xml,
    #[serde(rename = "XHR")]
    Xhr,
    Media,
    Unknown,
}

impl ContentType {
    /// Table row order.
    pub const ALL: [ContentType; 9] = [
        ContentType::Script,
        ContentType::Html,
        ContentType::Image,
        ContentType::Font,
        ContentType::Css,
        ContentType::Xml,
        ContentType::Xhr,
        ContentType::Media,
        ContentType::Unknown,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ContentType::Script => "Script",
            ContentType::Html => "HTML",
            ContentType::Image => "Image",
            ContentType::Font => "Font",
            ContentType::Css => "CSS",
            ContentType::Xml => "XML",
            ContentType::Xhr => "XHR",
            ContentType::Media => "Media",
            ContentType::Unknown => "Unknown",
        }
    }

    /// Maps a MIME type (parameters allowed) to a content type.
    pub fn from_mime(mime: &str) -> Option<ContentType> {
        let essence = mime
            .split(';')
            .next()
            .unwrap_or("")
            .trim()
            .to_ascii_lowercase();
        let (top, sub) = essence.split_once('/')?;
        let ct = match (top, sub) {
            ("text", "html") | ("application", "xhtml+xml") => ContentType::Html,
            ("text", "javascript" | "ecmascript" | "x-javascript" | "jscript")
            | ("application", "javascript" | "x-javascript" | "ecmascript" | "x-ecmascript") => {
                ContentType::Script
            }
            ("text", "css") => ContentType::Css,
            ("image", _) => ContentType::Image,
            ("font", _)
            | (
                "application",
                "font-woff" | "font-woff2" | "x-font-woff" | "x-font-ttf" | "x-font-otf",
            )
            | ("application", "vnd.ms-fontobject" | "font-sfnt") => ContentType::Font,
            ("audio" | "video", _) => ContentType::Media,
            ("application" | "text", "xml") => ContentType::Xml,
            ("application", s) if s.ends_with("+xml") => ContentType::Xml,
            _ => return None,
        };
        Some(ct)
    }

    /// Maps a browser resource-type label (`Document`, `Stylesheet`, ...).
    pub fn from_resource_type(rt: &str) -> Option<ContentType> {
        let ct = match rt.to_ascii_lowercase().as_str() {
            "document" | "subdocument" | "sub_frame" | "main_frame" => ContentType::Html,
            "script" => ContentType::Script,
            "stylesheet" => ContentType::Css,
            "image" => ContentType::Image,
            "font" => ContentType::Font,
            "media" => ContentType::Media,
            "xhr" | "fetch" | "xmlhttprequest" => ContentType::Xhr,
            _ => return None,
        };
        Some(ct)
    }

    /// Normalizes the pair recorded by the crawler.
    ///
    /// XML payloads stay XML even when fetched by XHR; other XHR/fetch
    /// traffic is XHR whatever its MIME type. Otherwise the MIME type wins and
    /// the resource type is the fallback.
    pub fn normalize(mime: Option<&str>, resource_type: Option<&str>) -> ContentType {
        let by_mime = mime.and_then(ContentType::from_mime);
        let by_type = resource_type.and_then(ContentType::from_resource_type);
        match (by_mime, by_type) {
            (Some(ContentType::Xml), _) => ContentType::Xml,
            (_, Some(ContentType::Xhr)) => ContentType::Xhr,
            (Some(ct), _) => ct,
            (None, Some(ct)) => ct,
            (None, None) => ContentType::Unknown,
        }
    }
}

impl fmt::Display for ContentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NetworkRequest {
    pub request_id: String,
    pub url: Url,
    pub method: String,
    pub content_type: ContentType,
    pub start_time: u64,
    pub end_time: u64,
    pub frame_id: Option<String>,
    pub first_party: Option<Url>,
}

impl NetworkRequest {
    pub fn duration(&self) -> u64 {
        self.end_time - self.start_time
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawRequest {
    #[serde(default)]
    request_id: Option<Value>,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    method: Option<String>,
    #[serde(default)]
    mime_type: Option<String>,
    #[serde(default)]
    resource_type: Option<String>,
    #[serde(default)]
    start_time: Option<serde_json::Number>,
    #[serde(default)]
    end_time: Option<serde_json::Number>,
    #[serde(default)]
    frame_id: Option<String>,
    #[serde(default)]
    first_party: Option<String>,
}

fn micros(n: &Option<serde_json::Number>) -> Option<u64> {
    let n = n.as_ref()?;
    n.as_u64().or_else(|| {
        n.as_f64()
            .filter(|f| f.is_finite() && *f >= 0.0)
            .map(|f| f.round() as u64)
    })
}

#[derive(Debug, Clone, Default)]
pub struct ParsedNetworkLog {
    pub requests: Vec<NetworkRequest>,
    pub warnings: Warnings,
}

/// Parses a line-delimited network log. Bad records are skipped and counted.
pub fn parse_network_log(raw: &[u8]) -> ParsedNetworkLog {
    let mut out = ParsedNetworkLog::default();
    let text = String::from_utf8_lossy(raw);
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let rec: RawRequest = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(_) => {
                out.warnings.bump(warnings::NETWORK_MALFORMED_LINE);
                continue;
            }
        };
        let Some(url_raw) = rec.url.as_deref().filter(|u| !u.trim().is_empty()) else {
            out.warnings.bump(warnings::NETWORK_MISSING_URL);
            continue;
        };
        let Some(url) = parse_absolute(url_raw) else {
            out.warnings.bump(warnings::NETWORK_INVALID_URL);
            continue;
        };
        let (Some(start_time), Some(end_time)) = (micros(&rec.start_time), micros(&rec.end_time))
        else {
            out.warnings.bump(warnings::NETWORK_MISSING_TIMING);
            continue;
        };
        if end_time < start_time {
            out.warnings.bump(warnings::NETWORK_NEGATIVE_SPAN);
            continue;
        }
        let request_id = match rec.request_id {
            Some(Value::String(s)) => s,
            Some(Value::Number(n)) => n.to_string(),
            _ => format!("#{}", out.requests.len()),
        };
        out.requests.push(NetworkRequest {
            request_id,
            url,
            method: rec.method.unwrap_or_else(|| "GET".to_owned()),
            content_type: ContentType::normalize(
                rec.mime_type.as_deref(),
                rec.resource_type.as_deref(),
            ),
            start_time,
            end_time,
            frame_id: rec.frame_id,
            first_party: rec.first_party.as_deref().and_then(parse_absolute),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mime_mapping() {
        assert_eq!(
            ContentType::normalize(Some("text/javascript"), None),
            ContentType::Script
        );
        assert_eq!(
            ContentType::normalize(Some("application/xml"), None),
            ContentType::Xml
        );
        assert_eq!(
            ContentType::normalize(Some("application/x-foo"), None),
            ContentType::Unknown
        );
        assert_eq!(
            ContentType::normalize(Some("text/html; charset=utf-8"), Some("Document")),
            ContentType::Html
        );
        assert_eq!(
            ContentType::normalize(Some("image/svg+xml"), None),
            ContentType::Image
        );
        assert_eq!(
            ContentType::normalize(Some("font/woff2"), None),
            ContentType::Font
        );
        assert_eq!(
            ContentType::normalize(Some("video/mp4"), None),
            ContentType::Media
        );
        assert_eq!(
            ContentType::normalize(Some("text/css"), None),
            ContentType::Css
        );
    }

    #[test]
    fn xhr_comes_from_resource_type() {
        assert_eq!(
            ContentType::normalize(Some("application/json"), Some("XHR")),
            ContentType::Xhr
        );
        assert_eq!(
            ContentType::normalize(Some("text/plain"), Some("Fetch")),
            ContentType::Xhr
        );
        assert_eq!(
            ContentType::normalize(Some("text/xml"), Some("XHR")),
            ContentType::Xml
        );
        assert_eq!(
            ContentType::normalize(None, Some("Script")),
            ContentType::Script
        );
        assert_eq!(
            ContentType::normalize(None, Some("Other")),
            ContentType::Unknown
        );
    }

    #[test]
    fn parses_and_rejects_records() {
        let raw = br#"{"requestId":"1","url":"https://a.com/x.js","method":"GET","mimeType":"text/javascript","startTime":10,"endTime":30,"frameId":"F","firstParty":"https://a.com/"}
{"requestId":"2","mimeType":"text/javascript","startTime":10,"endTime":30}
{"requestId":"3","url":"https://a.com/y.js","startTime":10}
{"requestId":"4","url":"not a url","startTime":1,"endTime":2}
{"requestId":"5","url":"https://a.com/z","startTime":9,"endTime":2}
garbage

{"requestId":6,"url":"https://b.com/p.png","mimeType":"image/png","startTime":1.4,"endTime":2.6}
"#;
        let log = parse_network_log(raw);
        assert_eq!(log.requests.len(), 2);
        assert_eq!(log.requests[0].content_type, ContentType::Script);
        assert_eq!(log.requests[0].duration(), 20);
        assert_eq!(log.requests[1].request_id, "6");
        assert_eq!(
            (log.requests[1].start_time, log.requests[1].end_time),
            (1, 3)
        );
        for code in [
            warnings::NETWORK_MISSING_URL,
            warnings::NETWORK_MISSING_TIMING,
            warnings::NETWORK_INVALID_URL,
            warnings::NETWORK_NEGATIVE_SPAN,
            warnings::NETWORK_MALFORMED_LINE,
        ] {
            assert_eq!(log.warnings.count(code), 1, "{code}");
        }
    }
}
