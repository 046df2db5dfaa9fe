//! Feed loading and event ingestion.

use std::cell::Cell;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::{DeserializeSeed, SeqAccess, Visitor};
use serde::Deserializer;
use url::Url;

use crate::cache::{AssetCache, CacheError, Fetch};
use crate::captions::{transcribe, CaptionFormat, ExternalBackend, TranscribeError, TranscriptSource};
use crate::domain::{
    canonical_event_id, canonical_matter_id, minutes_item_id, validate_ingestion_event, Body, Event, IngestionEvent,
    Matter, MinutesItem, UnknownVoteDecision, ValidationError, Vote, VoteAliases,
};
use crate::store::{Collection, Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum FeedError {
    #[error("cannot read feed {source_ref}: {message}")]
    Unreachable { source_ref: String, message: String },
    #[error("feed record {record_index} is malformed: {message}")]
    ParseError { record_index: usize, message: String },
}

impl FeedError {
    pub fn record_index(&self) -> Option<usize> {
        match self {
            FeedError::ParseError { record_index, .. } => Some(*record_index),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("record has no instance slug")]
    MissingInstance,
    #[error("record belongs to instance {found:?}, expected {expected:?}")]
    InstanceMismatch { expected: String, found: String },
    #[error("fetching {uri}: {source}")]
    Asset { uri: String, source: CacheError },
    #[error(transparent)]
    Transcribe(#[from] TranscribeError),
    #[error(transparent)]
    Vote(#[from] UnknownVoteDecision),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// A parsed feed plus the location relative asset URIs resolve against.
#[derive(Debug, Clone)]
pub struct Feed {
    pub base: Option<Url>,
    pub records: Vec<IngestionEvent>,
}

/// Loads a feed from a local path or an `http(s)`/`file` URL. An empty
/// document is an empty feed.
pub fn load_feed(source: &str, fetcher: &dyn Fetch) -> Result<Feed, FeedError> {
    let unreachable = |message: String| FeedError::Unreachable { source_ref: source.to_string(), message };
    let (bytes, base) = match Url::parse(source) {
        Ok(url) if matches!(url.scheme(), "http" | "https" | "file") => {
            let bytes = fetcher.fetch(&url).map_err(|e| unreachable(e.to_string()))?;
            (bytes, Some(url))
        }
        _ => {
            let path = Path::new(source);
            let bytes = std::fs::read(path).map_err(|e| unreachable(e.to_string()))?;
            let base = std::fs::canonicalize(path).ok().and_then(|p| Url::from_file_path(p).ok());
            (bytes, base)
        }
    };
    let records = parse_feed(&bytes)?;
    Ok(Feed { base, records })
}

/// Parses a feed document: a JSON array of ingestion records. Errors name
/// the 0-based index of the record being read when parsing failed.
pub fn parse_feed(bytes: &[u8]) -> Result<Vec<IngestionEvent>, FeedError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(Vec::new());
    }
    let seen = Cell::new(0usize);
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let parsed = FeedSeed { seen: &seen }.deserialize(&mut de).and_then(|records| de.end().map(|_| records));
    parsed.map_err(|e| FeedError::ParseError { record_index: seen.get(), message: e.to_string() })
}

struct FeedSeed<'a> {
    seen: &'a Cell<usize>,
}

impl<'de> DeserializeSeed<'de> for FeedSeed<'_> {
    type Value = Vec<IngestionEvent>;

    fn deserialize<D: Deserializer<'de>>(self, deserializer: D) -> Result<Self::Value, D::Error> {
        deserializer.deserialize_seq(self)
    }
}

impl<'de> Visitor<'de> for FeedSeed<'_> {
    type Value = Vec<IngestionEvent>;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an array of ingestion records")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
        let mut records = Vec::new();
        while let Some(record) = seq.next_element()? {
            records.push(record);
            self.seen.set(records.len());
        }
        Ok(records)
    }
}

/// Knobs for [`ingest_event`].
#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Also pull the session video into the asset cache.
    pub fetch_video: bool,
    /// `created_at` for transcripts produced from captions.
    pub now: DateTime<Utc>,
    pub vote_aliases: VoteAliases,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { fetch_video: false, now: Utc::now(), vote_aliases: VoteAliases::default() }
    }
}

/// What [`ingest_event`] did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOutcome {
    pub event: Event,
    /// False when the stored event was already identical.
    pub event_written: bool,
    pub transcript_generator: Option<String>,
}

/// Resolves a possibly relative asset reference against the feed location.
pub fn resolve_uri(base: Option<&Url>, reference: &str) -> Result<Url, IngestError> {
    let reference = reference.trim();
    let invalid = || IngestError::Validation(ValidationError::InvalidUri(reference.to_string()));
    match Url::parse(reference) {
        Ok(url) => Ok(url),
        Err(url::ParseError::RelativeUrlWithoutBase) => base.ok_or_else(invalid)?.join(reference).map_err(|_| invalid()),
        Err(_) => Err(invalid()),
    }
}

/// Ingests one record: validates it, fetches its assets through `cache`,
/// and persists the event, its minutes items, matters and (when captions
/// are available) transcript. Re-ingesting the same record is a no-op on
/// the store.
pub fn ingest_event(
    record: &IngestionEvent,
    base: Option<&Url>,
    store: &Store,
    cache: &AssetCache,
    opts: &IngestOptions,
) -> Result<IngestOutcome, IngestError> {
    let valid = validate_ingestion_event(record)?;
    let slug = record.instance_slug.trim();
    if slug.is_empty() {
        return Err(IngestError::MissingInstance);
    }
    let id = canonical_event_id(slug, &valid.body_name, &valid.session_datetime);

    let mut minutes = Vec::new();
    let mut matter_observations = Vec::new();
    for (i, item) in record.minutes_items.iter().flatten().enumerate() {
        let votes = item
            .votes
            .iter()
            .map(|v| Ok(Vote { person_name: v.person_name.trim().to_string(), decision: opts.vote_aliases.resolve(&v.decision)? }))
            .collect::<Result<Vec<_>, UnknownVoteDecision>>()?;
        let matter_name = item.matter_name.as_deref().map(str::trim).filter(|m| !m.is_empty());
        if let Some(name) = matter_name {
            matter_observations.push((name.to_string(), item.matter_status.clone(), item.matter_title.clone()));
        }
        minutes.push(MinutesItem {
            event_id: id.clone(),
            ordinal: i as u32 + 1,
            name: item.name.trim().to_string(),
            matter_id: matter_name.map(|m| canonical_matter_id(slug, m)),
            decision: item.decision.clone(),
            votes,
        });
    }

    let fetch = |reference: &str| -> Result<(Url, Vec<u8>), IngestError> {
        let url = resolve_uri(base, reference)?;
        let asset_err = |source| IngestError::Asset { uri: url.to_string(), source };
        let bytes = cache.fetch_asset(url.as_str()).and_then(|a| a.read()).map_err(asset_err)?;
        Ok((url, bytes))
    };
    let captions = match record.caption_uri.as_deref().filter(|u| !u.trim().is_empty()) {
        Some(reference) => {
            let (url, bytes) = fetch(reference)?;
            let format = CaptionFormat::detect(url.path(), &bytes);
            Some(TranscriptSource::Captions { bytes, format })
        }
        None => None,
    };
    if let Some(reference) = record.agenda_uri.as_deref().filter(|u| !u.trim().is_empty()) {
        fetch(reference)?;
    }
    if opts.fetch_video {
        fetch(valid.video_uri.as_str())?;
    }

    let (event, event_written) = store.with_key_lock(Collection::Events, &id, || -> Result<_, IngestError> {
        let previous = match store.get::<Event>(Collection::Events, &id) {
            Ok(e) => Some(e),
            Err(e) if e.is_not_found() => None,
            Err(e) => return Err(e.into()),
        };
        let mut event = Event {
            id: id.clone(),
            instance_slug: slug.to_string(),
            body: Body { name: valid.body_name.clone(), description: None },
            session_datetime: valid.session_datetime,
            video_uri: valid.video_uri.to_string(),
            static_thumbnail_ref: None,
            keywords: Vec::new(),
        };
        if let Some(prev) = previous {
            if prev.video_uri != event.video_uri {
                tracing::info!(event_id = %id, old = %prev.video_uri, new = %event.video_uri, "video_uri changed, overwriting");
            }
            event.body.description = prev.body.description;
            event.static_thumbnail_ref = prev.static_thumbnail_ref;
            event.keywords = prev.keywords;
        }
        let written = store.put_if_changed(Collection::Events, &id, &event)?;
        Ok((event, written))
    })?;

    for item in &minutes {
        store.put_if_changed(Collection::MinutesItems, &item.id(), item)?;
    }
    // Drop items left over from an earlier, longer version of the minutes.
    let prefix = format!("{id}-");
    for stale in store.list(Collection::MinutesItems)? {
        if let Some(ordinal) = stale.strip_prefix(&prefix).and_then(|o| o.parse::<u32>().ok()) {
            if ordinal as usize > minutes.len() && stale == minutes_item_id(&id, ordinal) {
                store.delete(Collection::MinutesItems, &stale)?;
            }
        }
    }

    for (name, status, title) in matter_observations {
        let matter_id = canonical_matter_id(slug, &name);
        store.with_key_lock(Collection::Matters, &matter_id, || -> Result<(), StoreError> {
            let mut matter = match store.get::<Matter>(Collection::Matters, &matter_id) {
                Ok(m) => m,
                Err(e) if e.is_not_found() => Matter::new(slug, &name),
                Err(e) => return Err(e),
            };
            matter.observe(valid.session_datetime, status.as_deref(), title.as_deref());
            store.put_if_changed(Collection::Matters, &matter_id, &matter)?;
            Ok(())
        })?;
    }

    let transcript_generator = match captions {
        Some(source) => Some(transcribe(&event, Some(source), store, opts.now)?.generator),
        None => None,
    };

    Ok(IngestOutcome { event, event_written, transcript_generator })
}

/// Fills in a blank instance slug from `instance` and rejects records that
/// name a different one.
pub fn assign_instance(record: &mut IngestionEvent, instance: &str) -> Result<(), IngestError> {
    let found = record.instance_slug.trim();
    if found.is_empty() {
        record.instance_slug = instance.to_string();
        Ok(())
    } else if found != instance {
        Err(IngestError::InstanceMismatch { expected: instance.to_string(), found: found.to_string() })
    } else {
        Ok(())
    }
}

/// Per-record result of [`ingest_feed`].
#[derive(Debug)]
pub struct RecordResult {
    pub record_index: usize,
    pub result: Result<IngestOutcome, IngestError>,
}

/// Ingests every record of `feed` for `instance`. Failures are reported per
/// record and do not stop the remaining records.
pub fn ingest_feed(
    feed: &Feed,
    instance: &str,
    store: &Store,
    cache: &AssetCache,
    opts: &IngestOptions,
) -> Vec<RecordResult> {
    feed.records
        .iter()
        .enumerate()
        .map(|(record_index, record)| {
            let mut record = record.clone();
            let result = assign_instance(&mut record, instance)
                .and_then(|_| ingest_event(&record, feed.base.as_ref(), store, cache, opts));
            RecordResult { record_index, result }
        })
        .collect()
}

/// What [`transcribe_pending`] should do.
#[derive(Debug, Clone, Default)]
pub struct TranscribeRequest {
    /// Restrict to these events; `None` means every stored event.
    pub events: Option<Vec<String>>,
    /// Redo events that already have a transcript.
    pub force: bool,
    /// Caption file to use (only meaningful for a single event).
    pub caption_file: Option<PathBuf>,
    /// Media file for the backend (only meaningful for a single event).
    /// Without it the session video is taken from the asset cache.
    pub media: Option<PathBuf>,
    pub backend: Option<ExternalBackend>,
}

/// Per-event result of [`transcribe_pending`].
#[derive(Debug)]
pub struct TranscribeResult {
    pub event_id: String,
    pub result: Result<String, TranscribeError>,
}

/// Produces transcripts for stored events that lack one (or all selected
/// events with `force`). Returns one result per event attempted, holding the
/// generator name on success.
pub fn transcribe_pending(
    store: &Store,
    cache: &AssetCache,
    request: &TranscribeRequest,
    now: DateTime<Utc>,
) -> Result<Vec<TranscribeResult>, StoreError> {
    let ids = match &request.events {
        Some(ids) => ids.clone(),
        None => store.list(Collection::Events)?,
    };
    let mut results = Vec::new();
    for id in ids {
        if !request.force && store.contains(Collection::Transcripts, &id) {
            continue;
        }
        let event: Event = match store.get(Collection::Events, &id) {
            Ok(e) => e,
            Err(e) if e.is_not_found() => {
                results.push(TranscribeResult { event_id: id.clone(), result: Err(TranscribeError::Store(e)) });
                continue;
            }
            Err(e) => return Err(e),
        };
        let result = transcript_source(&event, cache, request)
            .and_then(|source| transcribe(&event, source, store, now))
            .map(|t| t.generator);
        results.push(TranscribeResult { event_id: id, result });
    }
    Ok(results)
}

fn transcript_source(
    event: &Event,
    cache: &AssetCache,
    request: &TranscribeRequest,
) -> Result<Option<TranscriptSource>, TranscribeError> {
    if let Some(path) = &request.caption_file {
        let bytes = std::fs::read(path).map_err(|source| TranscribeError::CaptionFile { path: path.clone(), source })?;
        let format = CaptionFormat::detect(&path.to_string_lossy(), &bytes);
        return Ok(Some(TranscriptSource::Captions { bytes, format }));
    }
    let Some(backend) = request.backend.clone() else {
        return Ok(None);
    };
    let media = match &request.media {
        Some(path) => path.clone(),
        None => match cache.fetch_asset(&event.video_uri) {
            Ok(asset) => asset.path,
            Err(e) => {
                tracing::warn!(event_id = %event.id, error = %e, "session video unavailable");
                return Ok(None);
            }
        },
    };
    Ok(Some(TranscriptSource::External { backend, media }))
}
