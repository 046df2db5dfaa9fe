use std::ops::Range;

use super::Cue;
use crate::domain::Sentence;

/// A period after one of these words does not end a sentence.
const ABBREVIATIONS: &[&str] = &["Mr", "Ms", "Dr", "St", "No"];

const CLOSERS: &[char] = &['"', '\'', '\u{201D}', '\u{2019}', ')', ']'];

/// Splits the running text of `cues` into sentences.
///
/// A sentence ends at a run of `.`, `!` or `?` (optionally followed by
/// closing quotes or brackets) that is followed by whitespace or the end of
/// the text. A sentence's timing spans from the start of the cue holding its
/// first character to the end of the cue holding its last character.
pub fn segment_sentences(cues: &[Cue]) -> Vec<Sentence> {
    let mut text = String::new();
    let mut owners: Vec<(Range<usize>, usize)> = Vec::with_capacity(cues.len());
    for (i, cue) in cues.iter().enumerate() {
        let cue_text = cue.text.split_whitespace().collect::<Vec<_>>().join(" ");
        if cue_text.is_empty() {
            continue;
        }
        if !text.is_empty() {
            text.push(' ');
        }
        let start = text.len();
        text.push_str(&cue_text);
        owners.push((start..text.len(), i));
    }

    let owner_of = |byte: usize| -> usize {
        let pos = owners.partition_point(|(r, _)| r.end <= byte);
        owners[pos.min(owners.len() - 1)].1
    };

    let mut sentences = Vec::new();
    let mut emit = |range: Range<usize>| {
        let raw = &text[range.clone()];
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return;
        }
        let lead = raw.len() - raw.trim_start().len();
        let first_byte = range.start + lead;
        let last_byte = first_byte + trimmed.len() - trimmed.chars().next_back().map_or(1, char::len_utf8);
        let (first, last) = (owner_of(first_byte), owner_of(last_byte));
        let speaker = {
            let mut names = cues[first..=last].iter().map(|c| c.speaker_name.as_deref());
            let head = names.next().flatten();
            if names.all(|n| n == head) {
                head.map(str::to_string)
            } else {
                None
            }
        };
        sentences.push(Sentence {
            index: sentences.len(),
            start_time: cues[first].start_time,
            end_time: cues[last].end_time,
            text: trimmed.to_string(),
            speaker_name: speaker,
        });
    };

    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentence_start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
            j += 1;
        }
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let at_break = j == chars.len() || chars[j].1.is_whitespace();
        let single_period = c == '.' && j - i == 1;
        if at_break && !(single_period && is_abbreviation(&text[..pos])) {
            let end = chars.get(j).map_or(text.len(), |(b, _)| *b);
            emit(sentence_start..end);
            sentence_start = end;
        }
        i = j;
    }
    if sentence_start < text.len() {
        emit(sentence_start..text.len());
    }
    sentences
}

/// Whether the word ending right before a period is an abbreviation or a
/// single capital initial.
fn is_abbreviation(before: &str) -> bool {
    let word_start = before
        .char_indices()
        .rev()
        .find(|(_, c)| !c.is_alphanumeric())
        .map_or(0, |(i, c)| i + c.len_utf8());
    let word = &before[word_start..];
    let mut chars = word.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => c.is_uppercase(),
        _ => ABBREVIATIONS.contains(&word),
    }
}
