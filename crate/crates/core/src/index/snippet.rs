use std::collections::BTreeSet;

use crate::domain::Transcript;
use crate::textproc::{stem, token_spans, Span};

pub const DEFAULT_SNIPPET_CHARS: usize = 200;

const ELLIPSIS: &str = "...";

/// Picks the sentence matching the most distinct query stems (earliest on
/// ties) and wraps each matching token in `**`. Sentences longer than
/// `max_chars` are cut to a window of at most `max_chars` characters of
/// sentence text around the first match, with `...` marking each cut side.
/// Returns an empty string when no sentence matches.
pub fn make_snippet<S: AsRef<str>>(transcript: &Transcript, query_stems: &[S], max_chars: usize) -> String {
    let wanted: BTreeSet<&str> = query_stems.iter().map(AsRef::as_ref).collect();
    let mut best: Option<(usize, &str, Vec<Span>)> = None;
    for sentence in &transcript.sentences {
        let matched: Vec<Span> =
            token_spans(&sentence.text).into_iter().filter(|s| wanted.contains(stem(&s.surface).as_str())).collect();
        let distinct = matched.iter().map(|s| stem(&s.surface)).collect::<BTreeSet<_>>().len();
        if distinct > best.as_ref().map_or(0, |b| b.0) {
            best = Some((distinct, &sentence.text, matched));
        }
    }
    let Some((_, text, matched)) = best else {
        return String::new();
    };

    let (start, end) = window(text, &matched, max_chars);
    let mut out = String::new();
    if start > 0 {
        out.push_str(ELLIPSIS);
    }
    let mut cursor = start;
    for span in matched.iter().filter(|s| s.range.start >= start && s.range.end <= end) {
        out.push_str(&text[cursor..span.range.start]);
        out.push_str("**");
        out.push_str(&text[span.range.clone()]);
        out.push_str("**");
        cursor = span.range.end;
    }
    out.push_str(&text[cursor..end]);
    if end < text.len() {
        out.push_str(ELLIPSIS);
    }
    out
}

/// Byte range of `text` to show: the whole text when it fits, otherwise a
/// window of at most `max_chars` characters centred on the first match and
/// shrunk so that it does not split words.
fn window(text: &str, matched: &[Span], max_chars: usize) -> (usize, usize) {
    let bounds: Vec<usize> = text.char_indices().map(|(b, _)| b).chain([text.len()]).collect();
    let len = bounds.len() - 1;
    if len <= max_chars {
        return (0, text.len());
    }
    let char_at = |byte: usize| bounds.partition_point(|&b| b < byte);
    let first = &matched[0].range;
    let (fs, fe) = (char_at(first.start), char_at(first.end));
    let ws = fs.saturating_sub(max_chars.saturating_sub(fe - fs) / 2).min(len - max_chars);
    let we = ws + max_chars;

    let chars: Vec<char> = text.chars().collect();
    let mut s = ws;
    if s > 0 && chars[s - 1].is_alphanumeric() {
        while s < we && chars[s].is_alphanumeric() {
            s += 1;
        }
    }
    while s < we && chars[s].is_whitespace() {
        s += 1;
    }
    let mut e = we;
    if e < len && chars[e].is_alphanumeric() {
        while e > s && chars[e - 1].is_alphanumeric() {
            e -= 1;
        }
    }
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    if s >= e {
        // A single word wider than the window; cut it hard.
        return (bounds[ws], bounds[we]);
    }
    (bounds[s], bounds[e])
}

#[cfg(test)]
mod tests {
    use super::super::test_support::transcript;
    use super::*;

    fn stems(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| stem(w)).collect()
    }

    #[test]
    fn highlights_each_token() {
        let t = transcript("a", &["legislation around missing middle housing"]);
        assert_eq!(
            make_snippet(&t, &["miss", "middl", "hous"], 200),
            "legislation around **missing** **middle** **housing**"
        );
    }

    #[test]
    fn no_match_is_empty() {
        let t = transcript("a", &["budget hearing"]);
        assert_eq!(make_snippet(&t, &stems(&["housing"]), 200), "");
        assert_eq!(make_snippet(&transcript("a", &[]), &stems(&["housing"]), 200), "");
    }

    #[test]
    fn most_distinct_matches_then_earliest() {
        let t = transcript("a", &["Housing housing housing.", "Missing middle housing.", "Middle housing again."]);
        assert_eq!(make_snippet(&t, &stems(&["missing", "middle", "housing"]), 200), "**Missing** **middle** **housing**.");
        let t = transcript("a", &["First housing.", "Second housing."]);
        assert_eq!(make_snippet(&t, &stems(&["housing"]), 200), "First **housing**.");
    }

    #[test]
    fn long_sentence_is_windowed() {
        let filler = "word ".repeat(60);
        let sentence = format!("{filler}the governor proposed legislation around missing middle housing {filler}");
        let t = transcript("a", &[sentence.trim()]);
        let snippet = make_snippet(&t, &stems(&["missing", "middle", "housing"]), 80);
        assert!(snippet.starts_with("..."), "{snippet}");
        assert!(snippet.ends_with("..."), "{snippet}");
        assert!(snippet.contains("**missing** **middle** **housing**"), "{snippet}");
        let body = snippet.trim_start_matches("...").trim_end_matches("...").replace("**", "");
        assert!(body.chars().count() <= 80);
        assert!(sentence.contains(&body));
    }

    #[test]
    fn window_at_sentence_start() {
        let sentence = format!("Housing {}", "word ".repeat(100));
        let t = transcript("a", &[sentence.trim()]);
        let snippet = make_snippet(&t, &stems(&["housing"]), 40);
        assert!(snippet.starts_with("**Housing** word"));
        assert!(snippet.ends_with("word..."));
    }
}
