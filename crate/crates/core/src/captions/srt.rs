use super::text::clean_cue_text;
use super::{parse_timestamp, CaptionError, Cue};

/// Parses a SubRip document. Errors carry the 1-based ordinal of the
/// offending block. Multi-line cue text is joined with single spaces.
pub fn parse_srt(bytes: &[u8]) -> Result<Vec<Cue>, CaptionError> {
    let text = std::str::from_utf8(bytes).map_err(|_| CaptionError::InvalidEncoding)?;
    let text = text.strip_prefix('\u{FEFF}').unwrap_or(text);
    let lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();

    let mut cues = Vec::new();
    let mut block_no = 0;
    let mut i = 0;
    while i < lines.len() {
        while i < lines.len() && lines[i].trim().is_empty() {
            i += 1;
        }
        if i >= lines.len() {
            break;
        }
        let start = i;
        while i < lines.len() && !lines[i].trim().is_empty() {
            i += 1;
        }
        block_no += 1;
        let block = &lines[start..i];

        // The sequence number is optional in the wild; accept a block that
        // opens directly with its timing line.
        let timing_at = if block[0].contains("-->") {
            0
        } else if block[0].trim().bytes().all(|b| b.is_ascii_digit()) && block.len() > 1 {
            1
        } else {
            return Err(CaptionError::InvalidBlock(block_no));
        };
        let timing = block[timing_at];
        if !timing.contains("-->") {
            return Err(CaptionError::InvalidBlock(block_no));
        }
        let (left, right) = timing.split_once("-->").ok_or(CaptionError::InvalidBlock(block_no))?;
        let begin = parse_timestamp(left, true).ok_or(CaptionError::InvalidTiming(block_no))?;
        let end = right
            .split_whitespace()
            .next()
            .and_then(|t| parse_timestamp(t, true))
            .ok_or(CaptionError::InvalidTiming(block_no))?;
        if end < begin {
            return Err(CaptionError::InvalidTiming(block_no));
        }
        let clean = clean_cue_text(&block[timing_at + 1..].join("\n"));
        if clean.text.is_empty() {
            continue;
        }
        cues.push(Cue { start_time: begin, end_time: end, text: clean.text, speaker_name: clean.speaker });
    }
    Ok(cues)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block() {
        let cues = parse_srt(b"1\n00:00:00,000 --> 00:00:02,000\nHello\n\n").unwrap();
        assert_eq!(cues, vec![Cue { start_time: 0.0, end_time: 2.0, text: "Hello".into(), speaker_name: None }]);
    }

    #[test]
    fn end_before_start() {
        let doc = b"1\n00:00:00,000 --> 00:00:01,000\nok\n\n2\n00:00:05,000 --> 00:00:03,000\nbad\n";
        assert_eq!(parse_srt(doc), Err(CaptionError::InvalidTiming(2)));
    }

    #[test]
    fn multi_line_text_joined() {
        let cues = parse_srt(b"1\r\n00:00:01,500 --> 00:00:03,000\r\nHello\r\nthere.\r\n").unwrap();
        assert_eq!(cues[0].text, "Hello there.");
        assert_eq!(cues[0].start_time, 1.5);
    }

    #[test]
    fn garbage_block() {
        assert_eq!(parse_srt(b"hello world\n"), Err(CaptionError::InvalidBlock(1)));
        assert_eq!(parse_srt(b"1\nno timing here\n"), Err(CaptionError::InvalidBlock(1)));
        assert_eq!(parse_srt(b"1\n00:00:01 --> 00:00:02,000\nx\n"), Err(CaptionError::InvalidTiming(1)));
    }

    #[test]
    fn dot_separator_and_tags() {
        let cues = parse_srt(b"7\n00:00:01.000 --> 00:00:02.000 X1:0\n<i>So</i> <font color=\"red\">moved</font>\n").unwrap();
        assert_eq!(cues[0].text, "So moved");
    }

    #[test]
    fn empty_document() {
        assert!(parse_srt(b"").unwrap().is_empty());
        assert!(parse_srt(b"\n\n\r\n").unwrap().is_empty());
    }
}
