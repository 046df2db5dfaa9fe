use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::SearchIndex;
use crate::textproc::stemmed_tokens;

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("query has no searchable terms")]
    EmptyQuery,
    #[error("event {0} is not indexed")]
    UnknownEvent(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    #[default]
    Relevance,
    Date,
}

impl fmt::Display for SortOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SortOrder::Relevance => "relevance",
            SortOrder::Date => "date",
        })
    }
}

impl FromStr for SortOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relevance" => Ok(SortOrder::Relevance),
            "date" => Ok(SortOrder::Date),
            other => Err(format!("unknown sort order {other:?} (expected relevance or date)")),
        }
    }
}

/// Result filters. Dates select sessions whose UTC date `d` satisfies
/// `from <= d < to`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchFilters {
    pub body: Option<String>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub instance: Option<String>,
}

impl SearchFilters {
    pub fn admits(&self, instance: &str, body: &str, session: DateTime<Utc>) -> bool {
        let date = session.date_naive();
        self.body.as_deref().is_none_or(|b| b == body)
            && self.instance.as_deref().is_none_or(|i| i == instance)
            && self.from.is_none_or(|f| date >= f)
            && self.to.is_none_or(|t| date < t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRequest {
    pub query: String,
    pub filters: SearchFilters,
    pub sort: SortOrder,
    pub limit: usize,
    pub offset: usize,
    /// Time constant in days for `exp(-age/tau)` score decay; `None` disables it.
    pub recency_tau: Option<f64>,
}

impl SearchRequest {
    pub fn new(query: impl Into<String>) -> Self {
        SearchRequest {
            query: query.into(),
            filters: SearchFilters::default(),
            sort: SortOrder::Relevance,
            limit: 10,
            offset: 0,
            recency_tau: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHit {
    pub event_id: String,
    pub score: f64,
    pub session_datetime: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchPage {
    /// Matching events after filtering, before `offset`/`limit`.
    pub total_count: usize,
    pub hits: Vec<ScoredHit>,
    /// Distinct query stems, sorted.
    pub query_stems: Vec<String>,
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`; never negative.
pub fn idf(document_count: usize, df: usize) -> f64 {
    let (n, df) = (document_count as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// One term's BM25 contribution.
pub fn bm25_term(tf: f64, doc_len: f64, avg_len: f64, idf: f64) -> f64 {
    let norm = if avg_len > 0.0 { doc_len / avg_len } else { 0.0 };
    idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * norm))
}

impl SearchIndex {
    pub fn query_stems(query: &str) -> Result<Vec<String>, SearchError> {
        let stems: BTreeSet<String> = stemmed_tokens(query).into_iter().collect();
        if stems.is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        Ok(stems.into_iter().collect())
    }

    /// BM25 score of one event for a set of stems.
    pub fn score(&self, event_id: &str, stems: &[String]) -> f64 {
        let Some(doc) = self.docs.get(event_id) else { return 0.0 };
        let n = self.document_count();
        let avg = self.average_doc_length();
        stems
            .iter()
            .map(|s| {
                let tf = self.term_frequency(s, event_id);
                if tf == 0 {
                    0.0
                } else {
                    bm25_term(tf as f64, doc.length as f64, avg, idf(n, self.document_frequency(s)))
                }
            })
            .sum()
    }

    pub fn search(&self, req: &SearchRequest) -> Result<SearchPage, SearchError> {
        let stems = Self::query_stems(&req.query)?;
        let candidates: BTreeSet<&str> =
            stems.iter().flat_map(|s| self.postings(s).iter().map(|p| p.event_id.as_str())).collect();
        let newest = self.newest_session();

        let mut hits: Vec<ScoredHit> = candidates
            .into_iter()
            .filter_map(|id| {
                let doc = &self.docs[id];
                if !req.filters.admits(&doc.instance_slug, &doc.body_name, doc.session_datetime) {
                    return None;
                }
                let mut score = self.score(id, &stems);
                if let (Some(tau), Some(newest)) = (req.recency_tau, newest) {
                    let age_days = (newest - doc.session_datetime).num_seconds() as f64 / 86_400.0;
                    score *= (-age_days / tau).exp();
                }
                Some(ScoredHit { event_id: id.to_string(), score, session_datetime: doc.session_datetime })
            })
            .collect();

        let tie = |a: &ScoredHit, b: &ScoredHit| {
            b.session_datetime.cmp(&a.session_datetime).then_with(|| a.event_id.cmp(&b.event_id))
        };
        match req.sort {
            SortOrder::Relevance => hits.sort_by(|a, b| match b.score.total_cmp(&a.score) {
                Ordering::Equal => tie(a, b),
                o => o,
            }),
            SortOrder::Date => hits.sort_by(tie),
        }
        let total_count = hits.len();
        let hits = hits.into_iter().skip(req.offset).take(req.limit).collect();
        Ok(SearchPage { total_count, hits, query_stems: stems })
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    fn corpus() -> SearchIndex {
        let docs = [
            (event("a", "Council Briefing", "2021-01-04T09:30:00Z"), transcript("a", &["Missing middle housing is on the agenda."])),
            (event("b", "Land Use", "2021-02-01T14:00:00Z"), transcript("b", &["Housing housing and more housing."])),
            (event("c", "Council Briefing", "2021-03-01T09:30:00Z"), transcript("c", &["Transit levy renewal."])),
        ];
        SearchIndex::build(docs.iter().map(|(e, t)| (e, t)))
    }

    #[test]
    fn empty_query() {
        assert_eq!(corpus().search(&SearchRequest::new("  ?! ")), Err(SearchError::EmptyQuery));
    }

    #[test]
    fn absent_stems() {
        let page = corpus().search(&SearchRequest::new("zebra")).unwrap();
        assert_eq!(page.total_count, 0);
        assert!(page.hits.is_empty());
    }

    #[test]
    fn ranking_and_scores() {
        let index = corpus();
        let page = index.search(&SearchRequest::new("missing middle housing")).unwrap();
        let ids: Vec<_> = page.hits.iter().map(|h| h.event_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(page.query_stems, ["hous", "middl", "miss"]);
        // Hand computation for doc b: N=3, df(hous)=2, |b|=5, avgdl=(7+5+3)/3=5.
        let expected = (1.0f64 + 1.5 / 2.5).ln() * 3.0 * 2.2 / (3.0 + 1.2);
        assert!((page.hits[1].score - expected).abs() < 1e-12);
    }

    #[test]
    fn body_filter_is_intersection() {
        let index = corpus();
        let mut req = SearchRequest::new("housing levy");
        let all = index.search(&req).unwrap();
        req.filters.body = Some("Council Briefing".into());
        let filtered = index.search(&req).unwrap();
        let expected: Vec<_> = all
            .hits
            .iter()
            .filter(|h| index.doc(&h.event_id).unwrap().body_name == "Council Briefing")
            .cloned()
            .collect();
        assert_eq!(filtered.hits, expected);
        assert_eq!(filtered.total_count, 2);
    }

    #[test]
    fn date_filter_half_open_and_date_sort() {
        let index = corpus();
        let mut req = SearchRequest::new("housing levy");
        req.sort = SortOrder::Date;
        let ids = |p: SearchPage| p.hits.into_iter().map(|h| h.event_id).collect::<Vec<_>>();
        assert_eq!(ids(index.search(&req).unwrap()), ["c", "b", "a"]);
        req.filters.from = NaiveDate::from_ymd_opt(2021, 1, 4);
        req.filters.to = NaiveDate::from_ymd_opt(2021, 3, 1);
        assert_eq!(ids(index.search(&req).unwrap()), ["b", "a"]);
    }

    #[test]
    fn pagination_keeps_total() {
        let index = corpus();
        let mut req = SearchRequest::new("housing levy");
        req.limit = 1;
        req.offset = 1;
        let page = index.search(&req).unwrap();
        assert_eq!(page.total_count, 3);
        assert_eq!(page.hits.len(), 1);
    }

    #[test]
    fn recency_multiplier() {
        let index = corpus();
        let mut req = SearchRequest::new("housing");
        req.recency_tau = Some(1.0);
        let page = index.search(&req).unwrap();
        // Ages are measured from c, the newest session; b is far newer than a.
        assert_eq!(page.hits[0].event_id, "b");
        let plain = index.score("b", &page.query_stems);
        let age: f64 = 28.0 - (14.0 - 9.5) / 24.0;
        let b_hit = page.hits.iter().find(|h| h.event_id == "b").unwrap();
        assert!((b_hit.score - plain * (-age).exp()).abs() < 1e-12);
    }

    #[test]
    fn sort_order_parse() {
        assert_eq!("date".parse::<SortOrder>().unwrap(), SortOrder::Date);
        assert!("newest".parse::<SortOrder>().is_err());
    }
}
