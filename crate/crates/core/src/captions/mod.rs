//! Caption parsing and sentence-timestamped transcript generation.
//!
//! WebVTT and SRT files are parsed into [`Cue`]s, cues are segmented into
//! [`Sentence`](crate::domain::Sentence)s, and [`transcribe`] turns either a
//! caption file or an external speech-to-text command into a stored
//! [`Transcript`](crate::domain::Transcript).

mod segment;
mod srt;
mod text;
mod transcribe;
mod webvtt;

pub use segment::segment_sentences;
pub use srt::parse_srt;
pub use transcribe::{transcribe, ExternalBackend, TranscribeError, TranscriptSource};
pub use webvtt::parse_webvtt;

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Cue {
    pub start_time: f64,
    pub end_time: f64,
    pub text: String,
    pub speaker_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CaptionError {
    #[error("caption file is not valid UTF-8")]
    InvalidEncoding,
    #[error("WebVTT file does not start with a WEBVTT header")]
    MissingHeader,
    #[error("invalid cue timing at {0}")]
    InvalidTiming(usize),
    #[error("malformed SRT block {0}")]
    InvalidBlock(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptionFormat {
    WebVtt,
    Srt,
}

impl CaptionFormat {
    /// Guesses the format from a file name, falling back to content sniffing.
    pub fn detect(name: &str, bytes: &[u8]) -> CaptionFormat {
        let lower = name.to_ascii_lowercase();
        if lower.ends_with(".srt") {
            return CaptionFormat::Srt;
        }
        if lower.ends_with(".vtt") {
            return CaptionFormat::WebVtt;
        }
        let head = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
        if head.starts_with(b"WEBVTT") {
            CaptionFormat::WebVtt
        } else {
            CaptionFormat::Srt
        }
    }

    pub fn parse(self, bytes: &[u8]) -> Result<Vec<Cue>, CaptionError> {
        match self {
            CaptionFormat::WebVtt => parse_webvtt(bytes),
            CaptionFormat::Srt => parse_srt(bytes),
        }
    }
}

impl fmt::Display for CaptionFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaptionFormat::WebVtt => "webvtt",
            CaptionFormat::Srt => "srt",
        })
    }
}

impl FromStr for CaptionFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "webvtt" | "vtt" => Ok(CaptionFormat::WebVtt),
            "srt" => Ok(CaptionFormat::Srt),
            other => Err(format!("unknown caption format {other:?}")),
        }
    }
}

/// Parses `hh:mm:ss.mmm` or `mm:ss.mmm`. SRT's comma decimal separator is
/// accepted when `allow_comma` is set.
pub(crate) fn parse_timestamp(s: &str, allow_comma: bool) -> Option<f64> {
    let s = s.trim();
    let i = s.rfind(|c| c == '.' || (allow_comma && c == ','))?;
    let (clock, frac) = (&s[..i], &s[i + 1..]);
    if frac.len() != 3 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let parts: Vec<&str> = clock.split(':').collect();
    let field = |p: &str, max: Option<u64>| -> Option<u64> {
        if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) || p.len() > 9 {
            return None;
        }
        let v: u64 = p.parse().ok()?;
        match max {
            Some(m) if v > m => None,
            _ => Some(v),
        }
    };
    let (h, m, sec) = match parts.as_slice() {
        [m, sec] if m.len() == 2 && sec.len() == 2 => (0, field(m, Some(59))?, field(sec, Some(59))?),
        [h, m, sec] if h.len() >= 2 && m.len() == 2 && sec.len() == 2 => {
            (field(h, None)?, field(m, Some(59))?, field(sec, Some(59))?)
        }
        _ => return None,
    };
    let millis: u64 = frac.parse().ok()?;
    Some((h * 3600 + m * 60 + sec) as f64 + millis as f64 / 1000.0)
}
