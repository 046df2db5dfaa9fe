/// Cue payload with markup removed.
pub(crate) struct CleanText {
    pub text: String,
    pub speaker: Option<String>,
}

/// Strips WebVTT/SRT markup tags (`<i>`, `<c.x>`, `<00:01.000>`, `{\an8}`),
/// decodes character references and collapses whitespace. The annotation of
/// the first `<v ...>` voice span becomes the speaker.
pub(crate) fn clean_cue_text(raw: &str) -> CleanText {
    let mut out = String::with_capacity(raw.len());
    let mut speaker = None;
    let mut rest = raw;
    while let Some(c) = rest.chars().next() {
        match c {
            '<' => {
                let Some(close) = rest.find('>') else {
                    break;
                };
                let tag = &rest[1..close];
                if speaker.is_none() {
                    speaker = voice_annotation(tag);
                }
                // Tags separate words only when they already sit between whitespace.
                rest = &rest[close + 1..];
            }
            '{' if rest.starts_with("{\\") => match rest.find('}') {
                Some(close) => rest = &rest[close + 1..],
                None => break,
            },
            '&' => {
                let (decoded, consumed) = decode_reference(rest);
                out.push_str(&decoded);
                rest = &rest[consumed..];
            }
            _ => {
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    CleanText { text: normalize_whitespace(&out), speaker }
}

fn voice_annotation(tag: &str) -> Option<String> {
    let body = tag.strip_prefix('v')?;
    // `<v Name>` or `<v.class Name>`; anything else (e.g. `<vx>`) is not a voice.
    let annotation = match body.chars().next() {
        Some(c) if c.is_whitespace() => body,
        Some('.') => body.split_once(char::is_whitespace).map(|(_, a)| a)?,
        _ => return None,
    };
    let name = normalize_whitespace(annotation);
    (!name.is_empty()).then_some(name)
}

fn decode_reference(s: &str) -> (String, usize) {
    const NAMED: &[(&str, &str)] = &[
        ("&amp;", "&"),
        ("&lt;", "<"),
        ("&gt;", ">"),
        ("&quot;", "\""),
        ("&apos;", "'"),
        ("&nbsp;", " "),
        ("&lrm;", ""),
        ("&rlm;", ""),
    ];
    for (name, value) in NAMED {
        if s.starts_with(name) {
            return (value.to_string(), name.len());
        }
    }
    if let Some(body) = s.strip_prefix("&#") {
        if let Some(end) = body.find(';').filter(|&e| e <= 8) {
            let digits = &body[..end];
            let code = match digits.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok(),
                None => digits.parse().ok(),
            };
            if let Some(c) = code.and_then(char::from_u32) {
                return (c.to_string(), 2 + end + 1);
            }
        }
    }
    ("&".to_string(), 1)
}

pub(crate) fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voice_and_styling() {
        let c = clean_cue_text("<v Teresa>Hi.</v>");
        assert_eq!(c.text, "Hi.");
        assert_eq!(c.speaker.as_deref(), Some("Teresa"));

        let c = clean_cue_text("<v.loud Teresa Mosqueda><i>Thank</i> you,\n<b>colleagues</b>.");
        assert_eq!(c.text, "Thank you, colleagues.");
        assert_eq!(c.speaker.as_deref(), Some("Teresa Mosqueda"));
    }

    #[test]
    fn references_and_overrides() {
        assert_eq!(clean_cue_text("Fish &amp; chips &lt;3").text, "Fish & chips <3");
        assert_eq!(clean_cue_text("caf&#233; &#x41;").text, "café A");
        assert_eq!(clean_cue_text("{\\an8}Top text").text, "Top text");
        assert_eq!(clean_cue_text("AT&T").text, "AT&T");
    }

    #[test]
    fn unterminated_tag_drops_rest() {
        assert_eq!(clean_cue_text("hello <i broken").text, "hello");
    }
}
