//! Read-only query layer behind the HTTP API.
//!
//! Every endpoint is a method on [`ApiContext`] taking the raw query
//! parameters and returning a serializable document. The HTTP server does
//! nothing but route, call, and write [`to_json`] of the result, so a
//! response body is by construction the library call's serialization.

use std::sync::{Arc, RwLock};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::analytics::{run_ngram_query, AggregateMode, AnalyticsError, DateRange, NgramQuery, UsageSeries};
use crate::dataset::{dataset_stats, instance_slugs, load_events};
use crate::domain::{Event, InstanceManifest, Matter, MinutesItem, Transcript};
use crate::index::{
    current_generation, load_index, make_snippet, IndexError, SearchError, SearchFilters, SearchIndex,
    SearchRequest, SortOrder, DEFAULT_SNIPPET_CHARS,
};
use crate::store::{Collection, Store, StoreError};

pub const DEFAULT_LIMIT: usize = 10;
pub const MAX_LIMIT: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> u16 {
        match self {
            ApiError::BadRequest(_) => 400,
            ApiError::NotFound(_) => 404,
            ApiError::Internal(_) => 500,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { status: self.status(), error: self.to_string() }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl From<IndexError> for ApiError {
    fn from(e: IndexError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::UnknownInstance(_) => ApiError::NotFound(e.to_string()),
            AnalyticsError::Store(e) => e.into(),
            other => ApiError::BadRequest(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub status: u16,
    pub error: String,
}

/// Compact JSON, the wire form of every response.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("API documents serialize")
}

/// Decoded query-string pairs, in order. Keys may repeat.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Params(Vec<(String, String)>);

impl Params {
    pub fn parse(query: &str) -> Self {
        Params(url::form_urlencoded::parse(query.as_bytes()).into_owned().collect())
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Params(pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.0
    }

    /// Last non-empty value for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().rev().find(|(k, v)| k == key && !v.is_empty()).map(|(_, v)| v.as_str())
    }

    /// All non-empty values for `key`, in order.
    pub fn all(&self, key: &str) -> Vec<String> {
        self.0.iter().filter(|(k, v)| k == key && !v.is_empty()).map(|(_, v)| v.clone()).collect()
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ApiError> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| ApiError::BadRequest(format!("invalid value {v:?} for {key}"))))
            .transpose()
    }

    fn date(&self, key: &str) -> Result<Option<NaiveDate>, ApiError> {
        self.get(key)
            .map(|v| {
                NaiveDate::parse_from_str(v, "%Y-%m-%d")
                    .map_err(|_| ApiError::BadRequest(format!("invalid date {v:?} for {key} (expected YYYY-MM-DD)")))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool, ApiError> {
        match self.get(key) {
            None | Some("false") | Some("0") => Ok(false),
            Some("true") | Some("1") => Ok(true),
            Some(v) => Err(ApiError::BadRequest(format!("invalid value {v:?} for {key} (expected true or false)"))),
        }
    }

    /// `(limit, offset)` with the default and the cap applied.
    pub fn page(&self) -> Result<(usize, usize), ApiError> {
        let limit = self.parsed::<usize>("limit")?.unwrap_or(DEFAULT_LIMIT).min(MAX_LIMIT);
        let offset = self.parsed::<usize>("offset")?.unwrap_or(0);
        Ok((limit, offset))
    }
}

/// What a result card shows for one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCard {
    pub event_id: String,
    pub instance_slug: String,
    pub body_name: String,
    pub date: NaiveDate,
    pub session_datetime: DateTime<Utc>,
    pub video_uri: String,
    pub static_thumbnail_ref: Option<String>,
    pub keywords: Vec<String>,
    /// Highlighted transcript excerpt; empty outside search results.
    pub snippet: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl EventCard {
    pub fn from_event(event: &Event) -> Self {
        EventCard {
            event_id: event.id.clone(),
            instance_slug: event.instance_slug.clone(),
            body_name: event.body.name.clone(),
            date: event.session_date(),
            session_datetime: event.session_datetime,
            video_uri: event.video_uri.clone(),
            static_thumbnail_ref: event.static_thumbnail_ref.clone(),
            keywords: event.keywords.clone(),
            snippet: String::new(),
            score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancesResponse {
    pub instances: Vec<InstanceManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsResponse {
    pub total_count: usize,
    pub limit: usize,
    pub offset: usize,
    pub events: Vec<EventCard>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub query_stems: Vec<String>,
    pub sort: SortOrder,
    pub total_count: usize,
    pub limit: usize,
    pub offset: usize,
    pub results: Vec<EventCard>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinutesResponse {
    pub event_id: String,
    pub minutes_items: Vec<MinutesItem>,
    /// Matters referenced by the items, sorted by id.
    pub matters: Vec<Matter>,
}

/// Caches the loaded index and reloads it when a new generation is swapped in.
#[derive(Debug, Default)]
struct IndexHandle {
    loaded: RwLock<Option<(u64, Arc<SearchIndex>)>>,
}

impl IndexHandle {
    fn snapshot(&self, store: &Store) -> Result<Arc<SearchIndex>, IndexError> {
        let Some(generation) = current_generation(store)? else {
            return Ok(Arc::new(SearchIndex::new()));
        };
        if let Some((g, index)) = &*self.loaded.read().unwrap_or_else(|p| p.into_inner()) {
            if *g == generation {
                return Ok(index.clone());
            }
        }
        let Some((g, index)) = load_index(store)? else {
            return Ok(Arc::new(SearchIndex::new()));
        };
        let index = Arc::new(index);
        *self.loaded.write().unwrap_or_else(|p| p.into_inner()) = Some((g, index.clone()));
        Ok(index)
    }
}

#[derive(Debug)]
pub struct ApiContext {
    store: Store,
    recency_tau: Option<f64>,
    index: IndexHandle,
}

impl ApiContext {
    pub fn new(store: Store, recency_tau: Option<f64>) -> Self {
        ApiContext { store, recency_tau, index: IndexHandle::default() }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn event(&self, id: &str) -> Result<Event, ApiError> {
        self.store.get(Collection::Events, id).map_err(|e| match e {
            StoreError::NotFound { .. } | StoreError::InvalidId(_) => ApiError::NotFound(format!("unknown event {id}")),
            other => other.into(),
        })
    }

    /// `GET /api/instances`
    pub fn instances(&self) -> Result<InstancesResponse, ApiError> {
        let instances =
            instance_slugs(&self.store)?.iter().map(|slug| dataset_stats(&self.store, slug)).collect::<Result<_, _>>()?;
        Ok(InstancesResponse { instances })
    }

    /// `GET /api/events?instance=&body=&from=&to=&limit=&offset=`, newest first.
    pub fn events(&self, params: &Params) -> Result<EventsResponse, ApiError> {
        let filters = SearchFilters {
            body: params.get("body").map(str::to_string),
            from: params.date("from")?,
            to: params.date("to")?,
            instance: params.get("instance").map(str::to_string),
        };
        let (limit, offset) = params.page()?;
        let mut events: Vec<Event> = load_events(&self.store)?;
        if let Some(slug) = &filters.instance {
            if !events.iter().any(|e| &e.instance_slug == slug) {
                return Err(ApiError::NotFound(format!("unknown instance {slug}")));
            }
        }
        events.retain(|e| filters.admits(&e.instance_slug, &e.body.name, e.session_datetime));
        events.sort_by(|a, b| b.session_datetime.cmp(&a.session_datetime).then_with(|| a.id.cmp(&b.id)));
        Ok(EventsResponse {
            total_count: events.len(),
            limit,
            offset,
            events: events.iter().skip(offset).take(limit).map(EventCard::from_event).collect(),
        })
    }

    /// `GET /api/events/{id}`
    pub fn event_card(&self, id: &str) -> Result<EventCard, ApiError> {
        Ok(EventCard::from_event(&self.event(id)?))
    }

    /// `GET /api/events/{id}/transcript`
    pub fn transcript(&self, id: &str) -> Result<Transcript, ApiError> {
        self.event(id)?;
        self.store.get(Collection::Transcripts, id).map_err(|e| match e {
            StoreError::NotFound { .. } => ApiError::NotFound(format!("event {id} has no transcript")),
            other => other.into(),
        })
    }

    /// `GET /api/events/{id}/minutes`
    pub fn minutes(&self, id: &str) -> Result<MinutesResponse, ApiError> {
        self.event(id)?;
        let prefix = format!("{id}-");
        let mut minutes_items = Vec::new();
        for item_id in self.store.list(Collection::MinutesItems)? {
            if item_id.starts_with(&prefix) {
                let item: MinutesItem = self.store.get(Collection::MinutesItems, &item_id)?;
                if item.event_id == id {
                    minutes_items.push(item);
                }
            }
        }
        minutes_items.sort_by_key(|i| i.ordinal);
        let mut matter_ids: Vec<&String> = minutes_items.iter().filter_map(|i| i.matter_id.as_ref()).collect();
        matter_ids.sort();
        matter_ids.dedup();
        let mut matters = Vec::new();
        for matter_id in matter_ids {
            match self.store.get::<Matter>(Collection::Matters, matter_id) {
                Ok(m) => matters.push(m),
                Err(e) if e.is_not_found() => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(MinutesResponse { event_id: id.to_string(), minutes_items, matters })
    }

    /// `GET /api/search?q=&body=&from=&to=&sort=&limit=&offset=`
    pub fn search(&self, params: &Params) -> Result<SearchResponse, ApiError> {
        let query = params.get("q").ok_or_else(|| ApiError::BadRequest("missing query parameter q".into()))?;
        let (limit, offset) = params.page()?;
        let request = SearchRequest {
            query: query.to_string(),
            filters: SearchFilters {
                body: params.get("body").map(str::to_string),
                from: params.date("from")?,
                to: params.date("to")?,
                instance: params.get("instance").map(str::to_string),
            },
            sort: params.get("sort").map(str::parse).transpose().map_err(ApiError::BadRequest)?.unwrap_or_default(),
            limit,
            offset,
            recency_tau: self.recency_tau,
        };
        let index = self.index.snapshot(&self.store)?;
        let page = index.search(&request).map_err(|e| match e {
            SearchError::EmptyQuery => ApiError::BadRequest(e.to_string()),
            SearchError::UnknownEvent(_) => ApiError::Internal(e.to_string()),
        })?;
        let mut results = Vec::with_capacity(page.hits.len());
        for hit in &page.hits {
            let event = self.event(&hit.event_id)?;
            let transcript: Option<Transcript> = match self.store.get(Collection::Transcripts, &hit.event_id) {
                Ok(t) => Some(t),
                Err(e) if e.is_not_found() => None,
                Err(e) => return Err(e.into()),
            };
            let mut card = EventCard::from_event(&event);
            card.snippet = transcript
                .map(|t| make_snippet(&t, &page.query_stems, DEFAULT_SNIPPET_CHARS))
                .unwrap_or_default();
            card.score = Some(hit.score);
            results.push(card);
        }
        Ok(SearchResponse {
            query: query.to_string(),
            query_stems: page.query_stems,
            sort: request.sort,
            total_count: page.total_count,
            limit,
            offset,
            results,
        })
    }

    /// `GET /api/ngrams?gram=&n=&from=&to=&instance=...&pool=&aggregate=`
    pub fn ngrams(&self, params: &Params) -> Result<Vec<UsageSeries>, ApiError> {
        let query = ngram_query(params)?;
        Ok(run_ngram_query(&self.store, &query)?)
    }
}

/// Builds an [`NgramQuery`] from `/api/ngrams` parameters.
pub fn ngram_query(params: &Params) -> Result<NgramQuery, ApiError> {
    let grams = params.all("gram");
    if grams.is_empty() {
        return Err(ApiError::BadRequest("missing query parameter gram".into()));
    }
    let n = params.parsed::<usize>("n")?;
    if n == Some(0) {
        return Err(ApiError::BadRequest("n must be at least 1".into()));
    }
    Ok(NgramQuery {
        grams,
        n,
        range: DateRange::new(params.date("from")?, params.date("to")?),
        instances: params.all("instance"),
        pool: params.flag("pool")?,
        aggregate: params
            .get("aggregate")
            .map(str::parse::<AggregateMode>)
            .transpose()
            .map_err(ApiError::BadRequest)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_decode_and_repeat() {
        let p = Params::parse("gram=missing+middle&gram=polic&instance=a%2Fb&limit=");
        assert_eq!(p.all("gram"), ["missing middle", "polic"]);
        assert_eq!(p.get("instance"), Some("a/b"));
        assert_eq!(p.get("limit"), None);
    }

    #[test]
    fn paging_defaults_and_cap() {
        assert_eq!(Params::parse("").page().unwrap(), (10, 0));
        assert_eq!(Params::parse("limit=500&offset=20").page().unwrap(), (100, 20));
        assert!(matches!(Params::parse("limit=ten").page(), Err(ApiError::BadRequest(_))));
        assert!(matches!(Params::parse("offset=-1").page(), Err(ApiError::BadRequest(_))));
    }

    #[test]
    fn ngram_params() {
        let q = ngram_query(&Params::parse("gram=polic&n=1&from=2021-01-01&to=2021-02-01&pool=true&aggregate=rolling:3")).unwrap();
        assert_eq!(q.n, Some(1));
        assert!(q.pool);
        assert_eq!(q.aggregate, Some(AggregateMode::RollingMean(3)));
        assert!(ngram_query(&Params::parse("n=1")).is_err());
        assert!(ngram_query(&Params::parse("gram=x&from=01/02/2021")).is_err());
        assert!(ngram_query(&Params::parse("gram=x&pool=maybe")).is_err());
        assert!(ngram_query(&Params::parse("gram=x&n=0")).is_err());
    }
}
