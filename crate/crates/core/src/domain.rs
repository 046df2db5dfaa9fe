//! Persistent domain types for council meeting records.
//!
//! Every type here serializes to a flat JSON document. The ingestion record
//! ([`IngestionEvent`]) is kept deliberately loose so that a feed can be
//! parsed structurally before any field is validated.

use std::collections::HashMap;
use std::fmt;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Maximum number of keywords kept on an event card.
pub const MAX_KEYWORDS: usize = 5;

/// Length of a canonical id in hex characters.
pub const EVENT_ID_LEN: usize = 16;

const ID_SEPARATOR: char = '\u{1F}';

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("session_datetime is not an ISO-8601 timestamp with a UTC offset: {0:?}")]
    InvalidDatetime(String),
    #[error("video_uri is not a valid absolute URI: {0:?}")]
    InvalidUri(String),
}

/// One record of a gatherer feed, exactly as it appears in the feed document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestionEvent {
    pub instance_slug: String,
    pub body_name: String,
    pub session_datetime: String,
    pub video_uri: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caption_uri: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agenda_uri: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minutes_items: Option<Vec<IngestionMinutesItem>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestionMinutesItem {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matter_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matter_title: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matter_status: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<String>,
    pub votes: Vec<IngestionVote>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestionVote {
    pub person_name: String,
    pub decision: String,
}

/// A validated ingestion record: the three mandatory fields in parsed form.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedEvent {
    pub body_name: String,
    pub session_datetime: DateTime<Utc>,
    pub video_uri: url::Url,
}

/// Checks the minimal ingestion model: a committee name, a session
/// timestamp and a video URI. Fields are checked in that order and the first
/// failure is reported.
pub fn validate_ingestion_event(e: &IngestionEvent) -> Result<ValidatedEvent, ValidationError> {
    let body_name = e.body_name.trim();
    if body_name.is_empty() {
        return Err(ValidationError::MissingField("body_name"));
    }
    if e.session_datetime.trim().is_empty() {
        return Err(ValidationError::MissingField("session_datetime"));
    }
    let session_datetime = parse_utc(&e.session_datetime)
        .ok_or_else(|| ValidationError::InvalidDatetime(e.session_datetime.clone()))?;
    if e.video_uri.trim().is_empty() {
        return Err(ValidationError::MissingField("video_uri"));
    }
    let video_uri = url::Url::parse(e.video_uri.trim())
        .map_err(|_| ValidationError::InvalidUri(e.video_uri.clone()))?;
    Ok(ValidatedEvent {
        body_name: body_name.to_string(),
        session_datetime,
        video_uri,
    })
}

/// Parses an RFC 3339 timestamp. Inputs without an explicit offset are rejected.
pub fn parse_utc(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .ok()
        .map(|dt| dt.with_timezone(&Utc))
}

/// Canonical textual form of a UTC timestamp, as hashed into event ids.
pub fn iso8601(dt: &DateTime<Utc>) -> String {
    dt.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Full SHA-256 digest (hex) behind [`canonical_event_id`].
pub fn canonical_event_digest(instance_slug: &str, body_name: &str, session_datetime: &DateTime<Utc>) -> String {
    let key = format!(
        "{instance_slug}{ID_SEPARATOR}{body_name}{ID_SEPARATOR}{}",
        iso8601(session_datetime)
    );
    hex::encode(Sha256::digest(key.as_bytes()))
}

/// Deterministic event id: the first 16 hex chars of the SHA-256 of
/// `slug \x1F body \x1F iso8601`.
pub fn canonical_event_id(instance_slug: &str, body_name: &str, session_datetime: &DateTime<Utc>) -> String {
    let mut digest = canonical_event_digest(instance_slug, body_name, session_datetime);
    digest.truncate(EVENT_ID_LEN);
    digest
}

/// Matter ids are scoped to an instance.
pub fn canonical_matter_id(instance_slug: &str, matter_name: &str) -> String {
    let key = format!("{instance_slug}{ID_SEPARATOR}matter{ID_SEPARATOR}{matter_name}");
    let mut digest = hex::encode(Sha256::digest(key.as_bytes()));
    digest.truncate(EVENT_ID_LEN);
    digest
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Body {
    #[serde(rename = "body_name")]
    pub name: String,
    #[serde(rename = "body_description", default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub id: String,
    pub instance_slug: String,
    #[serde(flatten)]
    pub body: Body,
    pub session_datetime: DateTime<Utc>,
    pub video_uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_thumbnail_ref: Option<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
}

impl Event {
    /// UTC calendar date of the session; the bucket used by analytics.
    pub fn session_date(&self) -> NaiveDate {
        self.session_datetime.date_naive()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    #[serde(with = "millis")]
    pub start_time: f64,
    #[serde(with = "millis")]
    pub end_time: f64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub event_id: String,
    pub generator: String,
    pub created_at: DateTime<Utc>,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TranscriptError {
    #[error("sentence {position} has index {found}, expected {position}")]
    NonConsecutiveIndex { position: usize, found: usize },
    #[error("sentence {0} has a negative or non-finite start_time")]
    InvalidStart(usize),
    #[error("sentence {0} ends before it starts")]
    EndBeforeStart(usize),
    #[error("sentence {0} starts before the previous sentence")]
    StartsOutOfOrder(usize),
}

impl Transcript {
    /// Checks the sentence invariants: consecutive indices, non-negative
    /// starts, end >= start and non-decreasing starts.
    pub fn validate(&self) -> Result<(), TranscriptError> {
        let mut previous_start = 0.0f64;
        for (position, s) in self.sentences.iter().enumerate() {
            if s.index != position {
                return Err(TranscriptError::NonConsecutiveIndex { position, found: s.index });
            }
            if !s.start_time.is_finite() || s.start_time < 0.0 {
                return Err(TranscriptError::InvalidStart(position));
            }
            if !s.end_time.is_finite() || s.end_time < s.start_time {
                return Err(TranscriptError::EndBeforeStart(position));
            }
            if s.start_time < previous_start {
                return Err(TranscriptError::StartsOutOfOrder(position));
            }
            previous_start = s.start_time;
        }
        Ok(())
    }

    /// Whole transcript text, sentences joined by single spaces.
    pub fn full_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&s.text);
        }
        out
    }
}

/// One observation of a matter in a session's minutes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StatusChange {
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matter {
    pub id: String,
    pub instance_slug: String,
    pub name: String,
    pub title: String,
    pub status_history: Vec<StatusChange>,
}

impl Matter {
    pub fn new(instance_slug: &str, name: &str) -> Self {
        Matter {
            id: canonical_matter_id(instance_slug, name),
            instance_slug: instance_slug.to_string(),
            name: name.to_string(),
            title: String::new(),
            status_history: Vec::new(),
        }
    }

    /// Records an observation made at `timestamp`. History is kept sorted and
    /// duplicate-free and the title is recomputed from it (newest titled
    /// observation wins), so the result depends only on the set of
    /// observations, not on the order they arrive in.
    pub fn observe(&mut self, timestamp: DateTime<Utc>, status: Option<&str>, title: Option<&str>) {
        let change = StatusChange {
            timestamp,
            status: status.map(str::to_string),
            title: title.map(str::to_string),
        };
        if let Err(pos) = self.status_history.binary_search(&change) {
            self.status_history.insert(pos, change);
        }
        if let Some(t) = self
            .status_history
            .iter()
            .filter_map(|c| c.title.as_ref().map(|t| (c.timestamp, t)))
            .max()
        {
            self.title = t.1.clone();
        }
    }

    /// Most recent known status.
    pub fn current_status(&self) -> Option<&str> {
        self.status_history.iter().rev().find_map(|c| c.status.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoteDecision {
    Approve,
    Reject,
    Abstain,
    Absent,
}

impl fmt::Display for VoteDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VoteDecision::Approve => "Approve",
            VoteDecision::Reject => "Reject",
            VoteDecision::Abstain => "Abstain",
            VoteDecision::Absent => "Absent",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized vote decision {0:?}")]
pub struct UnknownVoteDecision(pub String);

/// Maps source vote strings onto [`VoteDecision`]. Lookup is
/// case-insensitive; anything not in the table is an error.
#[derive(Debug, Clone)]
pub struct VoteAliases {
    table: HashMap<String, VoteDecision>,
}

impl Default for VoteAliases {
    fn default() -> Self {
        use VoteDecision::*;
        let mut aliases = VoteAliases { table: HashMap::new() };
        for (alias, decision) in [
            ("approve", Approve),
            ("aye", Approve),
            ("yea", Approve),
            ("yes", Approve),
            ("in favor", Approve),
            ("reject", Reject),
            ("nay", Reject),
            ("no", Reject),
            ("opposed", Reject),
            ("abstain", Abstain),
            ("recused", Abstain),
            ("absent", Absent),
            ("excused", Absent),
        ] {
            aliases.insert(alias, decision);
        }
        aliases
    }
}

impl VoteAliases {
    /// A table that only knows the four canonical names.
    pub fn strict() -> Self {
        let mut aliases = VoteAliases { table: HashMap::new() };
        for d in [VoteDecision::Approve, VoteDecision::Reject, VoteDecision::Abstain, VoteDecision::Absent] {
            aliases.insert(&d.to_string(), d);
        }
        aliases
    }

    pub fn insert(&mut self, alias: &str, decision: VoteDecision) {
        self.table.insert(alias.trim().to_lowercase(), decision);
    }

    pub fn resolve(&self, raw: &str) -> Result<VoteDecision, UnknownVoteDecision> {
        self.table
            .get(&raw.trim().to_lowercase())
            .copied()
            .ok_or_else(|| UnknownVoteDecision(raw.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub person_name: String,
    pub decision: VoteDecision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinutesItem {
    pub event_id: String,
    pub ordinal: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matter_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<String>,
    #[serde(default)]
    pub votes: Vec<Vote>,
}

impl MinutesItem {
    /// Store id: event id plus zero-padded ordinal, so ids sort by ordinal.
    pub fn id(&self) -> String {
        minutes_item_id(&self.event_id, self.ordinal)
    }
}

pub fn minutes_item_id(event_id: &str, ordinal: u32) -> String {
    format!("{event_id}-{ordinal:04}")
}

/// Per-instance summary row: event count and first/last session dates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub instance_slug: String,
    pub event_count: usize,
    pub first_event: Option<NaiveDate>,
    pub last_event: Option<NaiveDate>,
}

impl InstanceManifest {
    pub fn from_dates<I>(instance_slug: &str, dates: I) -> Self
    where
        I: IntoIterator<Item = NaiveDate>,
    {
        let mut manifest = InstanceManifest {
            instance_slug: instance_slug.to_string(),
            event_count: 0,
            first_event: None,
            last_event: None,
        };
        for d in dates {
            manifest.event_count += 1;
            manifest.first_event = Some(manifest.first_event.map_or(d, |f| f.min(d)));
            manifest.last_event = Some(manifest.last_event.map_or(d, |l| l.max(d)));
        }
        manifest
    }
}

/// Seconds serialized with millisecond precision.
pub(crate) mod millis {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn round(seconds: f64) -> f64 {
        (seconds * 1000.0).round() / 1000.0
    }

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(round(*value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }
}
