//! Shared by the integration and acceptance tests: building a fixture store
//! the way the CLI would, and oracles that recompute results from raw store
//! documents without going through the code under test.

pub mod api_cases;
pub mod oracle;
pub mod vocab;

use std::path::Path;
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use councils_core::cache::{AssetCache, HttpFetcher, RetryPolicy};
use councils_core::domain::{parse_utc, Body, Event, Sentence, Transcript};
use councils_core::fixtures::{generate, FixtureSpec, FixtureSummary};
use councils_core::index::index_events;
use councils_core::ingest::{ingest_feed, load_feed, IngestOptions};
use councils_core::store::Store;

/// `created_at` for every transcript made by [`ingest_fixture`].
pub fn fixed_clock() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 4, 1, 0, 0, 0).unwrap()
}

pub fn local_fetcher() -> HttpFetcher {
    HttpFetcher::new(RetryPolicy { attempts: 1, base_delay: Duration::ZERO })
}

/// Ingests every feed of a generated fixture tree, panicking on any
/// record failure.
pub fn ingest_fixture(summary: &FixtureSummary, store: &Store, cache_dir: &Path) {
    let cache = AssetCache::open(cache_dir, Box::new(local_fetcher())).unwrap();
    let opts = IngestOptions { now: fixed_clock(), ..Default::default() };
    let fetcher = local_fetcher();
    for (slug, feed_path) in &summary.feeds {
        let feed = load_feed(feed_path.to_str().unwrap(), &fetcher).unwrap();
        for r in ingest_feed(&feed, slug, store, &cache, &opts) {
            if let Err(e) = r.result {
                panic!("{slug} record {}: {e}", r.record_index);
            }
        }
    }
}

/// Generates `spec` under `dir/fixtures`, ingests it into `dir/store` and
/// builds the index. Must run outside an async runtime: the blocking HTTP
/// client may not be dropped inside one.
pub fn fixture_store_with(dir: &Path, spec: &FixtureSpec) -> (Store, FixtureSummary) {
    let summary = generate(spec, &dir.join("fixtures")).unwrap();
    let store = Store::open(dir.join("store")).unwrap();
    ingest_fixture(&summary, &store, &dir.join("cache"));
    index_events(&store, None).unwrap();
    (store, summary)
}

/// [`fixture_store_with`] for the default seed-42 spec.
pub fn fixture_store(dir: &Path) -> (Store, FixtureSummary) {
    fixture_store_with(dir, &FixtureSpec::default())
}

/// An event in instance `"s"` with the given id, body and RFC 3339 time.
pub fn event(id: &str, body: &str, dt: &str) -> Event {
    Event {
        id: id.into(),
        instance_slug: "s".into(),
        body: Body { name: body.into(), description: None },
        session_datetime: parse_utc(dt).unwrap(),
        video_uri: format!("https://video.example.org/{id}.mp4"),
        static_thumbnail_ref: None,
        keywords: vec![],
    }
}

/// A transcript with one sentence per string, one second each.
pub fn transcript(id: &str, sentences: &[&str]) -> Transcript {
    Transcript {
        event_id: id.into(),
        generator: "captions:webvtt".into(),
        created_at: fixed_clock(),
        sentences: sentences
            .iter()
            .enumerate()
            .map(|(i, t)| Sentence {
                index: i,
                start_time: i as f64,
                end_time: i as f64 + 1.0,
                text: t.to_string(),
                speaker_name: None,
            })
            .collect(),
    }
}
