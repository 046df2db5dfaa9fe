//! Brute-force recomputations. These read raw event and transcript
//! documents and use their own tokenizer plus the `rust-stemmers` Porter2
//! implementation, so they share no text or ranking code with the library.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate, Utc};
use councils_core::domain::{Event, Transcript};
use councils_core::store::{Collection, Store};
use rust_stemmers::{Algorithm, Stemmer};

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

/// Lowercased alphanumeric runs, stemmed.
pub fn stems(text: &str) -> Vec<String> {
    let stemmer = Stemmer::create(Algorithm::English);
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| stemmer.stem(&w.to_lowercase()).into_owned())
        .collect()
}

#[derive(Debug, Clone)]
pub struct Doc {
    pub event_id: String,
    pub instance_slug: String,
    pub body_name: String,
    pub session_datetime: DateTime<Utc>,
    pub stems: Vec<String>,
}

/// Every stored event that has a transcript, with the transcript's stems in
/// reading order.
pub fn load_docs(store: &Store) -> Vec<Doc> {
    let mut docs = Vec::new();
    for id in store.list(Collection::Events).unwrap() {
        let event: Event = store.get(Collection::Events, &id).unwrap();
        let Ok(t) = store.get::<Transcript>(Collection::Transcripts, &id) else {
            continue;
        };
        let stems = t.sentences.iter().flat_map(|s| stems(&s.text)).collect();
        docs.push(Doc {
            event_id: id,
            instance_slug: event.instance_slug,
            body_name: event.body.name,
            session_datetime: event.session_datetime,
            stems,
        });
    }
    docs
}

/// BM25 score of every document containing at least one distinct query
/// stem, scored over the whole collection, sorted by score descending, then
/// newer session first, then event id.
pub fn bm25_ranking(docs: &[Doc], query: &str) -> Vec<(String, f64)> {
    let terms: BTreeSet<String> = stems(query).into_iter().collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.stems.len()).sum::<usize>() as f64 / n;
    let tf = |d: &Doc, t: &str| d.stems.iter().filter(|s| *s == t).count() as f64;
    let mut scored: Vec<(&Doc, f64)> = Vec::new();
    for doc in docs {
        let mut score = 0.0;
        let mut matched = false;
        for t in &terms {
            let f = tf(doc, t);
            if f == 0.0 {
                continue;
            }
            matched = true;
            let df = docs.iter().filter(|d| d.stems.contains(t)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let dl = doc.stems.len() as f64;
            score += idf * f * (K1 + 1.0) / (f + K1 * (1.0 - B + B * dl / avgdl));
        }
        if matched {
            scored.push((doc, score));
        }
    }
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| b.0.session_datetime.cmp(&a.0.session_datetime))
            .then_with(|| a.0.event_id.cmp(&b.0.event_id))
    });
    scored.into_iter().map(|(d, s)| (d.event_id.clone(), s)).collect()
}

/// Per-day `(count, total)` of the stemmed `gram` among all stemmed n-grams
/// of one instance's transcripts, for days in `[from, to)` with a non-zero
/// total.
pub fn usage_counts(
    store: &Store,
    instance: &str,
    gram: &str,
    n: usize,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> BTreeMap<NaiveDate, (u64, u64)> {
    let target = stems(gram);
    assert_eq!(target.len(), n, "gram {gram:?} is not {n} tokens");
    let mut days: BTreeMap<NaiveDate, (u64, u64)> = BTreeMap::new();
    for doc in load_docs(store) {
        let day = doc.session_datetime.date_naive();
        if doc.instance_slug != instance || from.is_some_and(|f| day < f) || to.is_some_and(|t| day >= t) {
            continue;
        }
        let entry = days.entry(day).or_default();
        if doc.stems.len() >= n {
            for i in 0..=doc.stems.len() - n {
                entry.1 += 1;
                if doc.stems[i..i + n] == target[..] {
                    entry.0 += 1;
                }
            }
        }
    }
    days.retain(|_, (_, total)| *total > 0);
    days
}
