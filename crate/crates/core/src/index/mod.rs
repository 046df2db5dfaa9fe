//! Stemmed unigram inverted index over transcripts.

mod persist;
mod search;
mod snippet;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{Event, Transcript, MAX_KEYWORDS};
use crate::textproc::{stem, token_spans};

pub use persist::{
    build_from_store, current_generation, index_events, load_index, save_index, IndexError, IndexReport,
    INDEX_FORMAT_VERSION,
};
pub use search::{bm25_term, idf, SearchError, SearchFilters, SearchPage, SearchRequest, ScoredHit, SortOrder, B, K1};
pub use snippet::{make_snippet, DEFAULT_SNIPPET_CHARS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub event_id: String,
    pub term_frequency: u32,
    pub sentence_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub document_count: usize,
    pub average_doc_length: f64,
    pub doc_lengths: BTreeMap<String, u32>,
}

/// Per-event data kept next to the postings: what filters and ranking need,
/// plus the display form of each stem for keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedDoc {
    pub instance_slug: String,
    pub body_name: String,
    pub session_datetime: DateTime<Utc>,
    pub length: u32,
    /// Most frequent surface form of each stem in this event (ties go to
    /// the lexicographically smallest form).
    pub surfaces: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    docs: BTreeMap<String, IndexedDoc>,
}

impl SearchIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn build<'a>(items: impl IntoIterator<Item = (&'a Event, &'a Transcript)>) -> Self {
        let mut index = SearchIndex::new();
        for (event, transcript) in items {
            index.upsert(event, transcript);
        }
        index
    }

    /// Indexes `transcript` under `event`, replacing any earlier postings
    /// for that event.
    pub fn upsert(&mut self, event: &Event, transcript: &Transcript) {
        self.remove(&event.id);

        struct Acc {
            tf: u32,
            sentences: BTreeSet<usize>,
            surfaces: BTreeMap<String, u32>,
        }
        let mut terms: BTreeMap<String, Acc> = BTreeMap::new();
        let mut length = 0u32;
        for sentence in &transcript.sentences {
            for span in token_spans(&sentence.text) {
                length += 1;
                let acc = terms.entry(stem(&span.surface)).or_insert_with(|| Acc {
                    tf: 0,
                    sentences: BTreeSet::new(),
                    surfaces: BTreeMap::new(),
                });
                acc.tf += 1;
                acc.sentences.insert(sentence.index);
                *acc.surfaces.entry(span.surface).or_default() += 1;
            }
        }

        let mut surfaces = BTreeMap::new();
        for (term, acc) in terms {
            // max_by_key keeps the last maximum; iterate in reverse so the
            // smallest surface wins ties.
            let surface = acc.surfaces.iter().rev().max_by_key(|(_, n)| **n).map(|(s, _)| s.clone()).unwrap_or_default();
            let posting = Posting {
                event_id: event.id.clone(),
                term_frequency: acc.tf,
                sentence_indices: acc.sentences.into_iter().collect(),
            };
            let list = self.postings.entry(term.clone()).or_default();
            let pos = list.partition_point(|p| p.event_id < event.id);
            list.insert(pos, posting);
            surfaces.insert(term, surface);
        }
        self.docs.insert(
            event.id.clone(),
            IndexedDoc {
                instance_slug: event.instance_slug.clone(),
                body_name: event.body.name.clone(),
                session_datetime: event.session_datetime,
                length,
                surfaces,
            },
        );
    }

    /// Drops an event from the index. Returns whether it was indexed.
    pub fn remove(&mut self, event_id: &str) -> bool {
        let Some(doc) = self.docs.remove(event_id) else {
            return false;
        };
        for term in doc.surfaces.keys() {
            if let Some(list) = self.postings.get_mut(term) {
                list.retain(|p| p.event_id != event_id);
                if list.is_empty() {
                    self.postings.remove(term);
                }
            }
        }
        true
    }

    pub fn document_count(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn contains(&self, event_id: &str) -> bool {
        self.docs.contains_key(event_id)
    }

    pub fn doc(&self, event_id: &str) -> Option<&IndexedDoc> {
        self.docs.get(event_id)
    }

    pub fn docs(&self) -> impl Iterator<Item = (&String, &IndexedDoc)> {
        self.docs.iter()
    }

    /// Postings for a stem, sorted by event id.
    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&String, &Vec<Posting>)> {
        self.postings.iter()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn term_frequency(&self, term: &str, event_id: &str) -> u32 {
        let list = self.postings(term);
        list.binary_search_by(|p| p.event_id.as_str().cmp(event_id))
            .map_or(0, |i| list[i].term_frequency)
    }

    pub fn average_doc_length(&self) -> f64 {
        if self.docs.is_empty() {
            return 0.0;
        }
        self.docs.values().map(|d| d.length as f64).sum::<f64>() / self.docs.len() as f64
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            document_count: self.docs.len(),
            average_doc_length: self.average_doc_length(),
            doc_lengths: self.docs.iter().map(|(id, d)| (id.clone(), d.length)).collect(),
        }
    }

    /// Top `k` stems of an event by `tf * ln(1 + N/df)`, shown as their most
    /// frequent surface form. Ties are broken by stem.
    pub fn extract_keywords(&self, event_id: &str, k: usize) -> Result<Vec<String>, SearchError> {
        let doc = self.docs.get(event_id).ok_or_else(|| SearchError::UnknownEvent(event_id.to_string()))?;
        let n = self.docs.len() as f64;
        let mut scored: Vec<(f64, &String)> = doc
            .surfaces
            .keys()
            .map(|term| {
                let tf = self.term_frequency(term, event_id) as f64;
                let df = self.document_frequency(term) as f64;
                (tf * (1.0 + n / df).ln(), term)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(scored.into_iter().take(k).map(|(_, term)| doc.surfaces[term].clone()).collect())
    }

    pub fn keywords(&self, event_id: &str) -> Result<Vec<String>, SearchError> {
        self.extract_keywords(event_id, MAX_KEYWORDS)
    }

    /// Newest session among indexed events; the reference point for the
    /// optional recency multiplier.
    pub fn newest_session(&self) -> Option<DateTime<Utc>> {
        self.docs.values().map(|d| d.session_datetime).max()
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn postings_and_lengths() {
        let (a, b) = (event("A", "Council", "2021-01-04T09:30:00Z"), event("B", "Council", "2021-01-05T09:30:00Z"));
        let (ta, tb) = (transcript("A", &["police policing"]), transcript("B", &["housing"]));
        let index = SearchIndex::build([(&a, &ta), (&b, &tb)]);
        assert_eq!(
            index.postings("polic"),
            &[Posting { event_id: "A".into(), term_frequency: 2, sentence_indices: vec![0] }]
        );
        assert_eq!(
            index.postings("hous"),
            &[Posting { event_id: "B".into(), term_frequency: 1, sentence_indices: vec![0] }]
        );
        let stats = index.stats();
        assert_eq!(stats.doc_lengths, BTreeMap::from([("A".into(), 2), ("B".into(), 1)]));
        assert_eq!(stats.document_count, 2);
        assert_eq!(stats.average_doc_length, 1.5);
    }

    #[test]
    fn empty_index() {
        let index = SearchIndex::build([]);
        assert_eq!(index.stats(), IndexStats { document_count: 0, average_doc_length: 0.0, doc_lengths: BTreeMap::new() });
    }

    #[test]
    fn reindexing_replaces_postings() {
        let e = event("A", "Council", "2021-01-04T09:30:00Z");
        let mut index = SearchIndex::build([(&e, &transcript("A", &["police"]))]);
        index.upsert(&e, &transcript("A", &["housing housing"]));
        assert!(index.postings("polic").is_empty());
        assert_eq!(index.term_frequency("hous", "A"), 2);
        assert_eq!(index.document_count(), 1);
    }

    #[test]
    fn keywords_by_tfidf() {
        let e = event("A", "Council", "2021-01-04T09:30:00Z");
        let index = SearchIndex::build([(&e, &transcript("A", &["tenant tenant law"]))]);
        // tf * ln(2): tenant 2ln2, law ln2.
        assert_eq!(index.extract_keywords("A", 5).unwrap(), ["tenant", "law"]);
        assert_eq!(index.extract_keywords("A", 1).unwrap(), ["tenant"]);
        assert!(matches!(index.extract_keywords("Z", 5), Err(SearchError::UnknownEvent(_))));
    }

    #[test]
    fn keyword_surface_and_ties() {
        let e = event("A", "Council", "2021-01-04T09:30:00Z");
        let index = SearchIndex::build([(&e, &transcript("A", &["Tenants tenants tenant. Zoning budget."]))]);
        // "tenant" stem: surfaces tenants x2, tenant x1. budget and zone tie at
        // tf 1 and are ordered by stem.
        assert_eq!(index.extract_keywords("A", 5).unwrap(), ["tenants", "budget", "zoning"]);
    }

    #[test]
    fn single_repeated_token() {
        let e = event("A", "Council", "2021-01-04T09:30:00Z");
        let index = SearchIndex::build([(&e, &transcript("A", &["budget budget budget"]))]);
        assert_eq!(index.keywords("A").unwrap(), ["budget"]);
    }
}
