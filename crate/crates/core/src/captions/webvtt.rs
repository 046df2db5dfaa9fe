use super::text::clean_cue_text;
use super::{parse_timestamp, CaptionError, Cue};

/// Parses a WebVTT document. `NOTE`, `STYLE` and `REGION` blocks are
/// skipped; cues whose text is empty after cleanup are dropped.
/// [`CaptionError::InvalidTiming`] carries the 1-based line number.
pub fn parse_webvtt(bytes: &[u8]) -> Result<Vec<Cue>, CaptionError> {
    let text = std::str::from_utf8(bytes).map_err(|_| CaptionError::InvalidEncoding)?;
    let text = text.strip_prefix('\u{FEFF}').unwrap_or(text);
    let lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();

    let header = lines.first().copied().unwrap_or("");
    let after = header.strip_prefix("WEBVTT").ok_or(CaptionError::MissingHeader)?;
    if !(after.is_empty() || after.starts_with([' ', '\t'])) {
        return Err(CaptionError::MissingHeader);
    }

    let mut cues = Vec::new();
    let mut i = 1;
    // Header block runs to the first blank line.
    while i < lines.len() && !lines[i].trim().is_empty() {
        i += 1;
    }
    while i < lines.len() {
        while i < lines.len() && lines[i].trim().is_empty() {
            i += 1;
        }
        if i >= lines.len() {
            break;
        }
        let block_start = i;
        while i < lines.len() && !lines[i].trim().is_empty() {
            i += 1;
        }
        let block = &lines[block_start..i];
        let first = block[0];
        let is_header = first.starts_with("NOTE") || first.starts_with("STYLE") || first.starts_with("REGION");
        if is_header && !first.contains("-->") {
            continue;
        }
        let Some(timing_offset) = block.iter().take(2).position(|l| l.contains("-->")) else {
            // Identifier without timing: not a cue.
            continue;
        };
        let line_no = block_start + timing_offset + 1;
        let (start, end) = parse_timing_line(block[timing_offset]).ok_or(CaptionError::InvalidTiming(line_no))?;
        if end < start {
            return Err(CaptionError::InvalidTiming(line_no));
        }
        let payload = block[timing_offset + 1..].join("\n");
        let clean = clean_cue_text(&payload);
        if clean.text.is_empty() {
            continue;
        }
        cues.push(Cue { start_time: start, end_time: end, text: clean.text, speaker_name: clean.speaker });
    }
    Ok(cues)
}

fn parse_timing_line(line: &str) -> Option<(f64, f64)> {
    let (left, right) = line.split_once("-->")?;
    let start = parse_timestamp(left, false)?;
    // Cue settings follow the end timestamp.
    let end_token = right.split_whitespace().next()?;
    let end = parse_timestamp(end_token, false)?;
    Some((start, end))
}
