//! The `/api/*` request set checked against golden files, and the library
//! call each request stands for.

use std::path::PathBuf;

use councils_core::api::{to_json, ApiContext, ApiError, Params};
use councils_core::dataset::load_events;
use councils_core::store::Store;

pub const SEATTLE: &str = "cdp-seattle-21723dcf";

/// Named request URIs over the seed-42 fixture store. Names starting with
/// `error_` must produce an error status.
pub fn cases(store: &Store) -> Vec<(&'static str, String)> {
    let events = load_events(store).unwrap();
    let first = events.iter().filter(|e| e.instance_slug == SEATTLE).min_by_key(|e| e.session_datetime).unwrap();
    let id = &first.id;
    let body = first.body.name.replace(' ', "+");
    vec![
        ("instances", "/api/instances".into()),
        ("events", "/api/events".into()),
        ("events_filtered", format!("/api/events?instance={SEATTLE}&from=2021-03-01&to=2021-10-01&limit=3&offset=1")),
        ("events_body", format!("/api/events?body={body}&limit=100")),
        ("event", format!("/api/events/{id}")),
        ("transcript", format!("/api/events/{id}/transcript")),
        ("minutes", format!("/api/events/{id}/minutes")),
        ("search_housing", "/api/search?q=housing".into()),
        ("search_phrase_by_date", "/api/search?q=missing+middle+housing&sort=date&limit=5".into()),
        ("search_filtered", format!("/api/search?q=housing&body={body}&from=2021-01-01&to=2022-01-01&instance={SEATTLE}")),
        ("search_page_two", "/api/search?q=council+budget&limit=3&offset=3".into()),
        ("ngrams_polic", "/api/ngrams?gram=polic&n=1&from=2021-01-01&to=2021-02-01".into()),
        (
            "ngrams_pooled_monthly",
            "/api/ngrams?gram=missing+middle+housing&gram=housing&from=2021-01-01&to=2022-01-01&pool=true&aggregate=monthly"
                .into(),
        ),
        ("ngrams_rolling", format!("/api/ngrams?gram=housing&instance={SEATTLE}&aggregate=rolling:3")),
        ("error_unknown_event", "/api/events/0000000000000000".into()),
        ("error_unknown_route", "/api/nowhere".into()),
        ("error_missing_q", "/api/search".into()),
        ("error_bad_limit", "/api/events?limit=ten".into()),
        ("error_bad_date", "/api/ngrams?gram=housing&from=2021-13-01".into()),
        ("error_unknown_instance", "/api/ngrams?gram=housing&instance=cdp-nowhere".into()),
        ("error_gram_arity", "/api/ngrams?gram=missing+middle&n=1".into()),
    ]
}

/// Status and body of the library call a URI stands for, serialized the
/// way the server must answer.
pub fn library(ctx: &ApiContext, uri: &str) -> (u16, Vec<u8>) {
    let (path, query) = uri.split_once('?').unwrap_or((uri, ""));
    let p = Params::parse(query);
    let segments: Vec<&str> = path.trim_start_matches('/').split('/').collect();
    let result = match segments.as_slice() {
        ["api", "instances"] => ctx.instances().map(|v| to_json(&v)),
        ["api", "events"] => ctx.events(&p).map(|v| to_json(&v)),
        ["api", "events", id] => ctx.event_card(id).map(|v| to_json(&v)),
        ["api", "events", id, "transcript"] => ctx.transcript(id).map(|v| to_json(&v)),
        ["api", "events", id, "minutes"] => ctx.minutes(id).map(|v| to_json(&v)),
        ["api", "search"] => ctx.search(&p).map(|v| to_json(&v)),
        ["api", "ngrams"] => ctx.ngrams(&p).map(|v| to_json(&v)),
        _ => Err(ApiError::NotFound(format!("no route for {path}"))),
    };
    match result {
        Ok(body) => (200, body),
        Err(e) => (e.status(), to_json(&e.body())),
    }
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../server/tests/golden")
}

/// Compares a response with `golden/<name>.json`. With `UPDATE_GOLDEN` set
/// the file is rewritten instead.
pub fn check_golden(name: &str, status: u16, body: &[u8]) -> Result<(), String> {
    let body: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| format!("{name}: response is not JSON: {e}"))?;
    let actual = serde_json::json!({ "status": status, "body": body });
    let path = golden_dir().join(format!("{name}.json"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&actual).unwrap() + "\n").unwrap();
        return Ok(());
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|_| format!("missing golden file {}; run with UPDATE_GOLDEN=1", path.display()))?;
    let expected: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if actual == expected {
        Ok(())
    } else {
        Err(format!("golden mismatch for {name}"))
    }
}
