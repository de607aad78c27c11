//! Classify URLs against an Adblock Plus style list.
//!
//! cargo run --example match_filters -- https://ad.doubleclick.net/x script https://news.example/

use adlens::filter::{match_url, MatchContext, RuleSet};
use adlens::ingest::ContentType;
use url::Url;

const LIST: &str = "\
||doubleclick.net^
||googletagservices.com^$third-party
/banner/*/img^
&ad_box_
@@||trusted.com/ad_box_ok
example.com##.ad
";

fn show(rules: &RuleSet, url: &str, ct: ContentType, page: &str) {
    let ctx = MatchContext::new(Url::parse(url).unwrap(), ct, &Url::parse(page).unwrap());
    let m = match_url(&ctx, rules);
    let verdict = if m.is_ad { "AD " } else { "ok " };
    print!("{verdict} {url} ({}, page {page})", ct.label());
    if let Some(r) = &m.matched_rule {
        print!(" rule {r}");
    }
    if let Some(r) = &m.exception_rule {
        print!(" excepted by {r}");
    }
    println!();
}

fn main() {
    let rules = RuleSet::parse(LIST);
    println!(
        "{} network rules; dropped: {:?}",
        rules.len(),
        rules.warnings
    );

    let args: Vec<String> = std::env::args().skip(1).collect();
    if let [url, ct, page] = args.as_slice() {
        let ct = ContentType::from_resource_type(ct).unwrap_or(ContentType::Unknown);
        show(&rules, url, ct, page);
        return;
    }
    show(
        &rules,
        "https://ad.doubleclick.net/adj/x",
        ContentType::Script,
        "https://news.example/",
    );
    show(
        &rules,
        "https://www.googletagservices.com/tag/js/gpt.js",
        ContentType::Script,
        "https://news.example/",
    );
    show(
        &rules,
        "https://www.googletagservices.com/tag/js/gpt.js",
        ContentType::Script,
        "https://googletagservices.com/",
    );
    show(
        &rules,
        "https://cdn.example/banner/300x250/img?id=3",
        ContentType::Image,
        "https://news.example/",
    );
    show(
        &rules,
        "https://trusted.com/ad_box_ok?x=1&ad_box_=2",
        ContentType::Image,
        "https://news.example/",
    );
    show(
        &rules,
        "https://cdn.example/app.js",
        ContentType::Script,
        "https://news.example/",
    );
}
