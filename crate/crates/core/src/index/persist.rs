//! On-disk layout under the store's `index` collection:
//!
//! * `current`: `{version, generation}`, the pointer readers follow;
//! * `g<generation>-stats`: [`IndexStats`] plus version and generation;
//! * `g<generation>-docs`: per-event [`IndexedDoc`] records;
//! * `g<generation>-shard-<h>`: postings for stems whose SHA-256 starts with
//!   hex digit `h`.
//!
//! A save writes a complete new generation and then swaps the pointer, so a
//! reader always sees one whole generation. Older generations are removed
//! after the swap. The format carries a version number and is internal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{IndexStats, IndexedDoc, Posting, SearchIndex};
use crate::domain::{Event, Transcript};
use crate::store::{Collection, Store, StoreError};

pub const INDEX_FORMAT_VERSION: u32 = 1;

const POINTER_ID: &str = "current";
const SHARD_DIGITS: &[u8; 16] = b"0123456789abcdef";

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("index format version {found} is not supported (expected {INDEX_FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("index generation {generation} is inconsistent: {reason}")]
    Inconsistent { generation: u64, reason: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct Pointer {
    version: u32,
    generation: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StatsDoc {
    version: u32,
    generation: u64,
    #[serde(flatten)]
    stats: IndexStats,
}

#[derive(Debug, Serialize, Deserialize)]
struct DocsDoc {
    version: u32,
    generation: u64,
    docs: BTreeMap<String, IndexedDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShardDoc {
    version: u32,
    generation: u64,
    shard: String,
    postings: BTreeMap<String, Vec<Posting>>,
}

fn shard_of(term: &str) -> char {
    let digest = Sha256::digest(term.as_bytes());
    SHARD_DIGITS[(digest[0] >> 4) as usize] as char
}

fn prefix(generation: u64) -> String {
    format!("g{generation:06}-")
}

fn check_version(found: u32) -> Result<(), IndexError> {
    if found == INDEX_FORMAT_VERSION {
        Ok(())
    } else {
        Err(IndexError::UnsupportedVersion { found })
    }
}

pub fn current_generation(store: &Store) -> Result<Option<u64>, IndexError> {
    match store.get::<Pointer>(Collection::Index, POINTER_ID) {
        Ok(p) => {
            check_version(p.version)?;
            Ok(Some(p.generation))
        }
        Err(e) if e.is_not_found() => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn load_generation(store: &Store, generation: u64) -> Result<SearchIndex, IndexError> {
    let p = prefix(generation);
    let stats: StatsDoc = store.get(Collection::Index, &format!("{p}stats"))?;
    check_version(stats.version)?;
    let docs: DocsDoc = store.get(Collection::Index, &format!("{p}docs"))?;
    check_version(docs.version)?;
    let mut postings = BTreeMap::new();
    for digit in SHARD_DIGITS {
        let shard: ShardDoc = store.get(Collection::Index, &format!("{p}shard-{}", *digit as char))?;
        check_version(shard.version)?;
        postings.extend(shard.postings);
    }
    let index = SearchIndex { postings, docs: docs.docs };
    if index.stats() != stats.stats {
        return Err(IndexError::Inconsistent { generation, reason: "stats do not match postings".into() });
    }
    Ok(index)
}

/// Loads the current generation, or `None` if nothing has been indexed yet.
pub fn load_index(store: &Store) -> Result<Option<(u64, SearchIndex)>, IndexError> {
    let mut attempts = 0;
    loop {
        let Some(generation) = current_generation(store)? else {
            return Ok(None);
        };
        match load_generation(store, generation) {
            Ok(index) => return Ok(Some((generation, index))),
            // The generation was swapped out and cleaned up mid-read.
            Err(IndexError::Store(e)) if e.is_not_found() && attempts < 3 => attempts += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Persists `index` as a new generation and swaps it in. Saving an index
/// equal to the current one writes nothing. Returns the live generation.
pub fn save_index(store: &Store, index: &SearchIndex) -> Result<u64, IndexError> {
    store.with_key_lock(Collection::Index, POINTER_ID, || {
        let previous = load_index(store)?;
        if let Some((generation, existing)) = &previous {
            if existing == index {
                return Ok(*generation);
            }
        }
        let generation = previous.map_or(1, |(g, _)| g + 1);
        let p = prefix(generation);
        let version = INDEX_FORMAT_VERSION;

        let mut shards: BTreeMap<char, BTreeMap<String, Vec<Posting>>> =
            SHARD_DIGITS.iter().map(|d| (*d as char, BTreeMap::new())).collect();
        for (term, list) in &index.postings {
            shards.get_mut(&shard_of(term)).expect("every shard digit is present").insert(term.clone(), list.clone());
        }
        for (digit, postings) in shards {
            let doc = ShardDoc { version, generation, shard: digit.to_string(), postings };
            store.put(Collection::Index, &format!("{p}shard-{digit}"), &doc)?;
        }
        store.put(Collection::Index, &format!("{p}docs"), &DocsDoc { version, generation, docs: index.docs.clone() })?;
        store.put(Collection::Index, &format!("{p}stats"), &StatsDoc { version, generation, stats: index.stats() })?;
        store.put(Collection::Index, POINTER_ID, &Pointer { version, generation })?;

        for id in store.list(Collection::Index)? {
            if id.starts_with('g') && !id.starts_with(&p) {
                store.delete(Collection::Index, &id)?;
            }
        }
        Ok(generation)
    })
}

fn transcript_of(store: &Store, event_id: &str) -> Result<Option<Transcript>, StoreError> {
    match store.get(Collection::Transcripts, event_id) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.is_not_found() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Builds an index over every event in the store that has a transcript.
pub fn build_from_store(store: &Store) -> Result<SearchIndex, IndexError> {
    let mut index = SearchIndex::new();
    for id in store.list(Collection::Events)? {
        let event: Event = store.get(Collection::Events, &id)?;
        if let Some(t) = transcript_of(store, &id)? {
            index.upsert(&event, &t);
        }
    }
    Ok(index)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexReport {
    pub generation: u64,
    pub document_count: usize,
    pub keywords_updated: usize,
}

/// Updates the persisted index and the keywords stored on events.
///
/// With `event_ids` = `None` the index is rebuilt from the whole store;
/// otherwise only the named events are re-indexed (or dropped, if their
/// event or transcript is gone). Both paths yield the same index for the
/// same store contents.
pub fn index_events(store: &Store, event_ids: Option<&[String]>) -> Result<IndexReport, IndexError> {
    let index = match event_ids {
        None => build_from_store(store)?,
        Some(ids) => {
            let mut index = load_index(store)?.map(|(_, i)| i).unwrap_or_default();
            for id in ids {
                let event = match store.get::<Event>(Collection::Events, id) {
                    Ok(e) => Some(e),
                    Err(e) if e.is_not_found() => None,
                    Err(e) => return Err(e.into()),
                };
                match (event, transcript_of(store, id)?) {
                    (Some(event), Some(t)) => index.upsert(&event, &t),
                    _ => {
                        index.remove(id);
                    }
                }
            }
            index
        }
    };
    let generation = save_index(store, &index)?;

    let mut keywords_updated = 0;
    for id in store.list(Collection::Events)? {
        let keywords = if index.contains(&id) { index.keywords(&id).unwrap_or_default() } else { Vec::new() };
        let changed = store.with_key_lock(Collection::Events, &id, || -> Result<bool, StoreError> {
            let mut event: Event = store.get(Collection::Events, &id)?;
            if event.keywords == keywords {
                return Ok(false);
            }
            event.keywords = keywords;
            store.put(Collection::Events, &id, &event)?;
            Ok(true)
        })?;
        keywords_updated += changed as usize;
    }
    Ok(IndexReport { generation, document_count: index.document_count(), keywords_updated })
}
