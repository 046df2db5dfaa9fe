//! Deterministic synthetic corpus generator.
//!
//! Output layout under the target directory:
//!
//! ```text
//! fixture_spec.json        the FixtureSpec that produced the tree
//! expected_counts.csv      instance,date,gram,n,count,total (unigrams and bigrams)
//! expected_manifest.csv    instance,events,first_event,last_event
//! <slug>/feed.json         ingestion feed, caption/agenda URIs relative to it
//! <slug>/captions/<id>.vtt WebVTT captions (every third event is .srt instead)
//! <slug>/agendas/<id>.txt  agenda text
//! ```
//!
//! Everything is drawn from one ChaCha stream seeded by `seed`, so the same
//! spec always yields byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, NaiveTime, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    canonical_event_id, iso8601, IngestionEvent, IngestionMinutesItem, IngestionVote, InstanceManifest,
};
use crate::textproc::{ngrams, stem, tokenize};

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),
    #[error("fixture i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedPhrase {
    pub phrase: String,
    pub dates: Vec<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub instances: Vec<String>,
    pub events_per_instance: usize,
    /// Inclusive `[from, to]` range of session dates.
    pub date_span: (NaiveDate, NaiveDate),
    pub vocabulary: Vec<WeightedTerm>,
    pub injected_phrases: Vec<InjectedPhrase>,
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

const DEFAULT_VOCABULARY: &[(&str, f64)] = &[
    ("the", 10.0),
    ("of", 8.0),
    ("and", 8.0),
    ("to", 8.0),
    ("a", 6.0),
    ("in", 5.0),
    ("we", 4.0),
    ("is", 4.0),
    ("that", 4.0),
    ("for", 4.0),
    ("this", 3.0),
    ("on", 3.0),
    ("our", 3.0),
    ("will", 2.0),
    ("are", 2.0),
    ("with", 2.0),
    ("from", 2.0),
    ("about", 2.0),
    ("police", 4.0),
    ("policing", 2.0),
    ("policy", 2.0),
    ("housing", 4.0),
    ("union", 1.5),
    ("homelessness", 2.0),
    ("tenants", 1.5),
    ("landlords", 1.0),
    ("renters", 1.0),
    ("inspected", 0.5),
    ("budget", 3.0),
    ("zoning", 1.5),
    ("transit", 1.5),
    ("council", 3.0),
    ("committee", 2.0),
    ("public", 2.5),
    ("comment", 2.0),
    ("legislation", 1.5),
    ("ordinance", 1.5),
    ("resolution", 1.0),
    ("amendment", 1.0),
    ("motion", 1.5),
    ("vote", 1.5),
    ("members", 1.5),
    ("city", 3.0),
    ("county", 1.5),
    ("residents", 1.5),
    ("community", 2.0),
    ("safety", 1.5),
    ("parks", 1.0),
    ("library", 0.5),
    ("funding", 1.5),
    ("department", 1.5),
    ("report", 1.0),
    ("plan", 1.0),
    ("development", 1.0),
    ("affordable", 1.0),
    ("middle", 0.3),
    ("missing", 0.3),
    ("2021", 0.5),
    ("five", 0.5),
];

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 42,
            instances: vec![
                "cdp-seattle-21723dcf".into(),
                "cdp-king-county-b656c71b".into(),
                "cdp-portland-d2bbda97".into(),
            ],
            events_per_instance: 10,
            date_span: (date(2021, 1, 4), date(2022, 3, 29)),
            vocabulary: DEFAULT_VOCABULARY
                .iter()
                .map(|(t, w)| WeightedTerm { term: t.to_string(), weight: *w })
                .collect(),
            injected_phrases: vec![InjectedPhrase {
                phrase: "missing middle housing".into(),
                dates: vec![date(2021, 3, 1), date(2021, 6, 1), date(2021, 9, 1)],
            }],
        }
    }
}

const BODIES: &[(&str, f64)] = &[
    ("Full Council", 4.0),
    ("Council Briefing", 3.0),
    ("Land Use Committee", 1.0),
    ("Transportation Committee", 1.0),
    ("Public Safety Committee", 1.0),
    ("Finance and Housing Committee", 1.0),
];

const MEMBERS: &[&str] = &[
    "Lewis", "Mosqueda", "Pedersen", "Sawant", "Herbold", "Juarez", "Morales", "Nelson", "Strauss", "Ryan",
    "Hardeman", "Rivera",
];

const VOTE_WORDS: &[(&str, f64)] =
    &[("Aye", 8.0), ("Yes", 2.0), ("Approve", 1.0), ("Nay", 2.0), ("No", 1.0), ("Abstain", 0.5), ("Excused", 0.5), ("Absent", 0.5)];

const MATTER_TITLES: &[&str] = &[
    "An ordinance relating to land use and zoning",
    "A resolution concerning tenant protections",
    "An ordinance amending the transportation levy",
    "A resolution adopting the annual budget",
    "An ordinance relating to police accountability",
];

const MATTER_STATUSES: &[&str] = &["Introduced", "In Committee", "Passed", "Adopted", "Failed"];

/// Whole sentences mixed into the word stream to exercise abbreviation
/// handling in sentence segmentation.
const SET_PIECES: &[&str] = &["Thank you Mr. Chair.", "Item No. 5 is next.", "Dr. Rivera will present.", "Is there a second?"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarRow {
    pub instance: String,
    pub date: NaiveDate,
    pub gram: String,
    pub n: usize,
    pub count: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedEvent {
    pub instance_slug: String,
    pub event_id: String,
    pub body_name: String,
    pub session_datetime: DateTime<Utc>,
    pub caption_path: PathBuf,
    /// Lowercased tokens of the caption text in order.
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSummary {
    pub feeds: Vec<(String, PathBuf)>,
    pub events: Vec<GeneratedEvent>,
    pub sidecar: PathBuf,
    pub manifest: Vec<InstanceManifest>,
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<(), FixtureError> {
        let invalid = |m: String| Err(FixtureError::InvalidSpec(m));
        let (from, to) = self.date_span;
        if from > to {
            return invalid(format!("date span {from}..{to} is reversed"));
        }
        let mut seen = BTreeSet::new();
        for slug in &self.instances {
            if slug.trim().is_empty() || slug.contains(['/', '\\']) || slug.starts_with('.') {
                return invalid(format!("bad instance slug {slug:?}"));
            }
            if !seen.insert(slug) {
                return invalid(format!("duplicate instance slug {slug:?}"));
            }
        }
        if self.events_per_instance > 0 && self.vocabulary.is_empty() {
            return invalid("vocabulary is empty".into());
        }
        for t in &self.vocabulary {
            if !(t.weight.is_finite() && t.weight > 0.0) {
                return invalid(format!("weight of {:?} must be positive", t.term));
            }
            if tokenize(&t.term).is_empty() {
                return invalid(format!("vocabulary term {:?} has no word characters", t.term));
            }
        }
        for p in &self.injected_phrases {
            if tokenize(&p.phrase).is_empty() {
                return invalid(format!("injected phrase {:?} has no word characters", p.phrase));
            }
            if let Some(d) = p.dates.iter().find(|d| **d < from || **d > to) {
                return invalid(format!("injection date {d} lies outside the date span"));
            }
        }
        let days = (to - from).num_days() as usize + 1;
        if self.events_per_instance > days * TIME_SLOTS * BODIES.len() {
            return invalid("too many events for the date span".into());
        }
        Ok(())
    }
}

const TIME_SLOTS: usize = 24;

/// Session start times: 08:00 to 19:30 on the half hour.
fn slot_time(slot: usize) -> NaiveTime {
    NaiveTime::from_hms_opt(8 + (slot / 2) as u32, 30 * (slot % 2) as u32, 0).expect("slot in range")
}

struct Writer<'a> {
    root: &'a Path,
}

impl Writer<'_> {
    fn write(&self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<PathBuf, FixtureError> {
        let path = self.root.join(rel);
        let io = |source| FixtureError::Io { path: path.clone(), source };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        fs::write(&path, bytes).map_err(io)?;
        Ok(path)
    }
}

struct Cue {
    start_ms: u64,
    end_ms: u64,
    speaker: &'static str,
    text: String,
}

fn timestamp(ms: u64, sep: char) -> String {
    format!("{:02}:{:02}:{:02}{sep}{:03}", ms / 3_600_000, ms / 60_000 % 60, ms / 1000 % 60, ms % 1000)
}

fn render_vtt(cues: &[Cue]) -> String {
    let mut out = String::from("WEBVTT\n\n");
    for c in cues {
        let _ = write!(
            out,
            "{} --> {}\n<v {}>{}\n\n",
            timestamp(c.start_ms, '.'),
            timestamp(c.end_ms, '.'),
            c.speaker,
            c.text
        );
    }
    out
}

fn render_srt(cues: &[Cue]) -> String {
    let mut out = String::new();
    for (i, c) in cues.iter().enumerate() {
        // Long cues wrap onto a second line, as broadcast captions do.
        let words: Vec<&str> = c.text.split(' ').collect();
        let text = if words.len() > 6 {
            format!("{}\n{}", words[..words.len() / 2].join(" "), words[words.len() / 2..].join(" "))
        } else {
            c.text.clone()
        };
        let _ = write!(out, "{}\n{} --> {}\n{}\n\n", i + 1, timestamp(c.start_ms, ','), timestamp(c.end_ms, ','), text);
    }
    out
}

fn sentence_text(words: &[&str], terminal: char) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.chars().next() {
        let upper: String = first.to_uppercase().collect();
        s.replace_range(..first.len_utf8(), &upper);
    }
    s.push(terminal);
    s
}

/// Generates the fixture tree under `out`.
pub fn generate(spec: &FixtureSpec, out: &Path) -> Result<FixtureSummary, FixtureError> {
    spec.validate()?;
    let writer = Writer { root: out };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab_dist = (!spec.vocabulary.is_empty())
        .then(|| WeightedIndex::new(spec.vocabulary.iter().map(|t| t.weight)).expect("weights validated"));
    let body_dist = WeightedIndex::new(BODIES.iter().map(|b| b.1)).expect("static weights");
    let vote_dist = WeightedIndex::new(VOTE_WORDS.iter().map(|v| v.1)).expect("static weights");
    let (from, to) = spec.date_span;
    let span_days = (to - from).num_days();

    let mut pinned: Vec<NaiveDate> = vec![from, to];
    for p in &spec.injected_phrases {
        pinned.extend(&p.dates);
    }
    let mut seen = BTreeSet::new();
    pinned.retain(|d| seen.insert(*d));

    let mut summary_events = Vec::new();
    let mut feeds = Vec::new();
    let mut sidecar: BTreeMap<(String, NaiveDate, usize, String), u64> = BTreeMap::new();
    let mut totals: BTreeMap<(String, NaiveDate, usize), u64> = BTreeMap::new();
    let mut manifest = Vec::new();
    let mut global_index = 0usize;

    for slug in &spec.instances {
        let k = spec.events_per_instance;
        let mut dates: Vec<NaiveDate> = pinned.iter().copied().take(k).collect();
        while dates.len() < k {
            dates.push(from + Duration::days(rng.random_range(0..=span_days)));
        }

        let mut taken = BTreeSet::new();
        let mut sessions = Vec::new();
        for d in dates {
            loop {
                let body = BODIES[body_dist.sample(&mut rng)].0;
                let slot = rng.random_range(0..TIME_SLOTS);
                let dt = d.and_time(slot_time(slot)).and_utc();
                if taken.insert((body, dt)) {
                    sessions.push((dt, body));
                    break;
                }
            }
        }
        sessions.sort();
        manifest.push(InstanceManifest::from_dates(slug, sessions.iter().map(|(dt, _)| dt.date_naive())));

        let mut records = Vec::new();
        for (dt, body) in sessions {
            let id = canonical_event_id(slug, body, &dt);
            let day = dt.date_naive();

            // Sentences as word lists, then the caption cues carrying them.
            let mut sentences: Vec<String> = Vec::new();
            let n_sentences = rng.random_range(8..=16);
            for _ in 0..n_sentences {
                if rng.random_bool(0.1) {
                    sentences.push(SET_PIECES.choose(&mut rng).expect("non-empty").to_string());
                    continue;
                }
                let len = rng.random_range(5..=14);
                let dist = vocab_dist.as_ref().expect("vocabulary present when events are generated");
                let words: Vec<&str> = (0..len).map(|_| spec.vocabulary[dist.sample(&mut rng)].term.as_str()).collect();
                let terminal = if rng.random_bool(0.1) { '?' } else { '.' };
                sentences.push(sentence_text(&words, terminal));
            }
            for p in &spec.injected_phrases {
                if p.dates.contains(&day) {
                    let at = rng.random_range(0..=sentences.len());
                    sentences.insert(at, format!("We heard testimony on {} today.", p.phrase));
                }
            }

            let mut cues = Vec::new();
            let mut clock_ms = rng.random_range(0..2_000u64);
            let mut words = sentences.iter().flat_map(|s| s.split(' ')).peekable();
            let mut speaker = *MEMBERS.choose(&mut rng).expect("non-empty");
            while words.peek().is_some() {
                let take = rng.random_range(4..=10);
                let chunk: Vec<&str> = words.by_ref().take(take).collect();
                let start = clock_ms;
                let end = start + 400 * chunk.len() as u64 + rng.random_range(0..400u64);
                cues.push(Cue { start_ms: start, end_ms: end, speaker, text: chunk.join(" ") });
                clock_ms = end + rng.random_range(0..500u64);
                if rng.random_bool(0.25) {
                    speaker = MEMBERS.choose(&mut rng).expect("non-empty");
                }
            }

            let srt = global_index % 3 == 2;
            global_index += 1;
            let caption_rel = format!("captions/{id}.{}", if srt { "srt" } else { "vtt" });
            let caption_doc = if srt { render_srt(&cues) } else { render_vtt(&cues) };
            let caption_path = writer.write(Path::new(slug).join(&caption_rel), caption_doc.as_bytes())?;

            let tokens: Vec<String> = sentences.iter().flat_map(|s| tokenize(s)).collect();
            let stems: Vec<String> = tokens.iter().map(|t| stem(t)).collect();
            for n in [1usize, 2] {
                let grams = ngrams(&stems, n).expect("n >= 1");
                *totals.entry((slug.clone(), day, n)).or_default() += grams.len() as u64;
                for g in grams {
                    *sidecar.entry((slug.clone(), day, n, g)).or_default() += 1;
                }
            }

            let n_items = rng.random_range(1..=4);
            let mut minutes = Vec::new();
            let mut agenda = format!("{body}\n{}\n\n", iso8601(&dt));
            for ordinal in 1..=n_items {
                let matter_no = 120_000 + rng.random_range(0..12);
                let matter_name = format!("CB {matter_no}");
                let title = MATTER_TITLES[matter_no as usize % MATTER_TITLES.len()];
                let status = MATTER_STATUSES.choose(&mut rng).expect("non-empty");
                let voters = rng.random_range(5..=9);
                let votes = MEMBERS
                    .choose_multiple(&mut rng, voters)
                    .map(|m| IngestionVote {
                        person_name: m.to_string(),
                        decision: VOTE_WORDS[vote_dist.sample(&mut rng)].0.to_string(),
                    })
                    .collect();
                let _ = writeln!(agenda, "{ordinal}. {matter_name}: {title}");
                minutes.push(IngestionMinutesItem {
                    name: format!("{matter_name}: {title}"),
                    matter_name: Some(matter_name),
                    matter_title: Some(title.to_string()),
                    matter_status: Some(status.to_string()),
                    decision: Some(status.to_string()),
                    votes,
                });
            }
            let agenda_rel = format!("agendas/{id}.txt");
            writer.write(Path::new(slug).join(&agenda_rel), agenda.as_bytes())?;

            records.push(IngestionEvent {
                instance_slug: slug.clone(),
                body_name: body.to_string(),
                session_datetime: iso8601(&dt),
                video_uri: format!("https://video.example.org/{slug}/{id}.mp4"),
                caption_uri: Some(caption_rel),
                agenda_uri: Some(agenda_rel),
                minutes_items: Some(minutes),
            });
            summary_events.push(GeneratedEvent {
                instance_slug: slug.clone(),
                event_id: id,
                body_name: body.to_string(),
                session_datetime: dt,
                caption_path,
                tokens,
            });
        }
        let mut feed = serde_json::to_vec_pretty(&records).expect("feed serializes");
        feed.push(b'\n');
        let feed_path = writer.write(Path::new(slug).join("feed.json"), &feed)?;
        feeds.push((slug.clone(), feed_path));
    }

    let mut csv_out = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    csv_out.write_record(["instance", "date", "gram", "n", "count", "total"]).expect("in-memory write");
    for ((instance, day, n, gram), count) in sidecar {
        let total = totals[&(instance.clone(), day, n)];
        csv_out
            .serialize(SidecarRow { instance, date: day, gram, n, count, total })
            .expect("in-memory write");
    }
    let sidecar = writer.write("expected_counts.csv", &csv_out.into_inner().expect("in-memory flush"))?;

    let mut manifest_csv = String::from("instance,events,first_event,last_event\n");
    for m in &manifest {
        let show = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(manifest_csv, "{},{},{},{}", m.instance_slug, m.event_count, show(m.first_event), show(m.last_event));
    }
    writer.write("expected_manifest.csv", manifest_csv.as_bytes())?;

    let mut spec_json = serde_json::to_vec_pretty(spec).expect("spec serializes");
    spec_json.push(b'\n');
    writer.write("fixture_spec.json", &spec_json)?;

    Ok(FixtureSummary { feeds, events: summary_events, sidecar, manifest })
}

pub fn read_sidecar(path: &Path) -> Result<Vec<SidecarRow>, FixtureError> {
    let io = |e: csv::Error| FixtureError::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) };
    let mut reader = csv::Reader::from_path(path).map_err(io)?;
    reader.deserialize().collect::<Result<Vec<SidecarRow>, _>>().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::captions::CaptionFormat;

    fn small(seed: u64) -> FixtureSpec {
        FixtureSpec { seed, events_per_instance: 4, ..FixtureSpec::default() }
    }

    fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap().flatten() {
                let p = e.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn deterministic() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        generate(&small(42), a.path()).unwrap();
        generate(&small(42), b.path()).unwrap();
        assert_eq!(tree(a.path()), tree(b.path()));
        let c = tempfile::tempdir().unwrap();
        generate(&small(43), c.path()).unwrap();
        assert_ne!(tree(a.path()), tree(c.path()));
    }

    #[test]
    fn zero_events_is_empty_feed() {
        let dir = tempfile::tempdir().unwrap();
        let spec = FixtureSpec { events_per_instance: 0, ..FixtureSpec::default() };
        let summary = generate(&spec, dir.path()).unwrap();
        for (_, feed) in &summary.feeds {
            assert_eq!(fs::read_to_string(feed).unwrap().trim(), "[]");
        }
        assert!(read_sidecar(&summary.sidecar).unwrap().is_empty());
    }

    #[test]
    fn manifest_pins_span_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let summary = generate(&small(7), dir.path()).unwrap();
        for m in &summary.manifest {
            assert_eq!(m.event_count, 4);
            assert_eq!(m.first_event, Some(date(2021, 1, 4)));
            assert_eq!(m.last_event, Some(date(2022, 3, 29)));
        }
    }

    #[test]
    fn injected_phrase_in_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let summary = generate(&FixtureSpec::default(), dir.path()).unwrap();
        let rows = read_sidecar(&summary.sidecar).unwrap();
        let targets = [date(2021, 3, 1), date(2021, 6, 1), date(2021, 9, 1)];
        for slug in &FixtureSpec::default().instances {
            let per_date: Vec<u64> = targets
                .iter()
                .map(|d| {
                    rows.iter()
                        .filter(|r| &r.instance == slug && r.date == *d && r.n == 2 && r.gram == "middl hous")
                        .map(|r| r.count)
                        .sum()
                })
                .collect();
            assert!(per_date.iter().all(|c| *c >= 1), "{slug}: {per_date:?}");
            assert!(per_date.iter().sum::<u64>() >= 3);
        }
    }

    #[test]
    fn sidecar_matches_caption_retokenization() {
        let dir = tempfile::tempdir().unwrap();
        let summary = generate(&small(11), dir.path()).unwrap();
        let mut srt = 0;
        for e in &summary.events {
            let bytes = fs::read(&e.caption_path).unwrap();
            let name = e.caption_path.to_string_lossy();
            let format = CaptionFormat::detect(&name, &bytes);
            srt += (format == CaptionFormat::Srt) as usize;
            let cues = format.parse(&bytes).unwrap();
            let tokens: Vec<String> = cues.iter().flat_map(|c| tokenize(&c.text)).collect();
            assert_eq!(tokens, e.tokens, "{name}");
        }
        assert!(srt > 0);
    }

    #[test]
    fn invalid_specs() {
        let spec = FixtureSpec { date_span: (date(2022, 1, 1), date(2021, 1, 1)), ..FixtureSpec::default() };
        assert!(spec.validate().is_err());
        let mut spec = FixtureSpec::default();
        spec.instances.push(spec.instances[0].clone());
        assert!(spec.validate().is_err());
        let mut spec = FixtureSpec::default();
        spec.injected_phrases[0].dates.push(date(2030, 1, 1));
        assert!(spec.validate().is_err());
    }
}
