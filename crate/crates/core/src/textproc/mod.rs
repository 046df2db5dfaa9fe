//! Tokenization, stemming and n-gram extraction shared by the search index
//! and the usage analytics.
//!
//! A token is a maximal run of Unicode letters and digits, lowercased.
//! Everything else separates tokens. No stopwords are removed here.

mod porter2;

use std::ops::Range;

pub use porter2::stem;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("n-gram size must be at least 1")]
pub struct InvalidN;

/// A token and its stem.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub stem: String,
}

impl Token {
    pub fn new(surface: String) -> Self {
        let stem = stem(&surface);
        Token { surface, stem }
    }
}

/// A token together with the byte range it occupies in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub surface: String,
    pub range: Range<usize>,
}

pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text).into_iter().map(|s| s.surface).collect()
}

pub fn token_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            spans.push(span(text, s..i));
        }
    }
    if let Some(s) = start {
        spans.push(span(text, s..text.len()));
    }
    spans
}

fn span(text: &str, range: Range<usize>) -> Span {
    Span { surface: text[range.clone()].to_lowercase(), range }
}

/// Tokenize then stem each token.
pub fn stemmed_tokens(text: &str) -> Vec<String> {
    token_spans(text).iter().map(|s| stem(&s.surface)).collect()
}

pub fn tokens(text: &str) -> Vec<Token> {
    tokenize(text).into_iter().map(Token::new).collect()
}

/// All contiguous windows of `n` tokens, space-joined, in order.
pub fn ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> Result<Vec<String>, InvalidN> {
    if n == 0 {
        return Err(InvalidN);
    }
    Ok(tokens
        .windows(n)
        .map(|w| {
            let mut gram = String::new();
            for (i, t) in w.iter().enumerate() {
                if i > 0 {
                    gram.push(' ');
                }
                gram.push_str(t.as_ref());
            }
            gram
        })
        .collect())
}
