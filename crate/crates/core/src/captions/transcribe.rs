use std::path::{Path, PathBuf};
use std::process::Command;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::{segment_sentences, CaptionError, CaptionFormat};
use crate::domain::{Event, Sentence, Transcript, TranscriptError};
use crate::store::{Collection, Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum TranscribeError {
    #[error("no caption file or transcription backend available for event {0}")]
    NoTranscriptSource(String),
    #[error("cannot read caption file {path}: {source}")]
    CaptionFile { path: PathBuf, source: std::io::Error },
    #[error("transcription backend exited with status {0:?}")]
    BackendFailed(Option<i32>),
    #[error("could not run transcription backend: {0}")]
    BackendSpawn(std::io::Error),
    #[error("transcription backend wrote an invalid transcript: {0}")]
    BackendOutputInvalid(String),
    #[error(transparent)]
    Caption(#[from] CaptionError),
    #[error("caption file produced an invalid transcript: {0}")]
    InvalidTranscript(#[from] TranscriptError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// An external speech-to-text command. It is invoked as
/// `<program> <args...> --media <path> --out <path>` and must exit 0 after
/// writing a transcript document to the `--out` path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalBackend {
    pub name: String,
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalBackend {
    /// Builds a backend from a whitespace-separated command line. The name is
    /// the program's file stem.
    pub fn from_command_line(cmd: &str) -> Option<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        let name = Path::new(&program)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| program.clone());
        Some(ExternalBackend { name, program, args: parts.collect() })
    }

    fn run(&self, media: &Path, out: &Path) -> Result<Vec<Sentence>, TranscribeError> {
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg("--media")
            .arg(media)
            .arg("--out")
            .arg(out)
            .status()
            .map_err(TranscribeError::BackendSpawn)?;
        if !status.success() {
            return Err(TranscribeError::BackendFailed(status.code()));
        }
        let bytes = std::fs::read(out)
            .map_err(|e| TranscribeError::BackendOutputInvalid(format!("cannot read {}: {e}", out.display())))?;
        parse_backend_output(&bytes)
    }
}

pub enum TranscriptSource {
    Captions { bytes: Vec<u8>, format: CaptionFormat },
    External { backend: ExternalBackend, media: PathBuf },
}

/// The backend's `event_id`, `generator` and `created_at` are replaced by
/// ours; only the sentences are taken from its output.
#[derive(Deserialize)]
struct BackendDocument {
    sentences: Vec<Sentence>,
}

fn parse_backend_output(bytes: &[u8]) -> Result<Vec<Sentence>, TranscribeError> {
    let doc: BackendDocument =
        serde_json::from_slice(bytes).map_err(|e| TranscribeError::BackendOutputInvalid(e.to_string()))?;
    Ok(doc.sentences)
}

/// Produces and stores the transcript for `event`.
pub fn transcribe(
    event: &Event,
    source: Option<TranscriptSource>,
    store: &Store,
    created_at: DateTime<Utc>,
) -> Result<Transcript, TranscribeError> {
    let source = source.ok_or_else(|| TranscribeError::NoTranscriptSource(event.id.clone()))?;
    let transcript = match source {
        TranscriptSource::Captions { bytes, format } => {
            let mut cues = format.parse(&bytes)?;
            cues.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
            let sentences = segment_sentences(&cues);
            let t = Transcript { event_id: event.id.clone(), generator: format!("captions:{format}"), created_at, sentences };
            t.validate()?;
            t
        }
        TranscriptSource::External { backend, media } => {
            let out_dir = store.root().join(Collection::Transcripts.as_str());
            let out = out_dir.join(format!(".{}.backend.{}.tmp", event.id, std::process::id()));
            let result = backend.run(&media, &out);
            let _ = std::fs::remove_file(&out);
            let generator = format!("external:{}", backend.name);
            let t = Transcript { event_id: event.id.clone(), generator, created_at, sentences: result? };
            t.validate().map_err(|e| TranscribeError::BackendOutputInvalid(e.to_string()))?;
            t
        }
    };
    store_transcript(store, &transcript)?;
    Ok(transcript)
}

/// Stores a transcript unless an identical one (ignoring `created_at`) is
/// already there, so re-running a pipeline leaves the store untouched.
pub(crate) fn store_transcript(store: &Store, transcript: &Transcript) -> Result<(), StoreError> {
    store.with_key_lock(Collection::Transcripts, &transcript.event_id, || {
        match store.get::<Transcript>(Collection::Transcripts, &transcript.event_id) {
            Ok(existing)
                if existing.generator == transcript.generator
                    && same_sentences(&existing.sentences, &transcript.sentences) =>
            {
                Ok(())
            }
            Ok(_) => store.put(Collection::Transcripts, &transcript.event_id, transcript),
            Err(e) if e.is_not_found() => store.put(Collection::Transcripts, &transcript.event_id, transcript),
            Err(e) => Err(e),
        }
    })
}

fn same_sentences(a: &[Sentence], b: &[Sentence]) -> bool {
    use crate::domain::millis::round;
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.index == y.index
                && round(x.start_time) == round(y.start_time)
                && round(x.end_time) == round(y.end_time)
                && x.text == y.text
                && x.speaker_name == y.speaker_name
        })
}
