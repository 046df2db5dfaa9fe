//! The Porter2 ("Snowball English") stemming algorithm.
//!
//! Works on a char buffer. `Y` (upper case) marks a consonantal y during
//! processing and is lowered again at the end. Regions R1 and R2 are kept as
//! char offsets and never move once marked; suffix replacements only ever
//! shorten or rewrite the tail, so region tests compare against the start of
//! the matched suffix.

const EXCEPTIONS: &[(&str, &str)] = &[
    ("skis", "ski"),
    ("skies", "sky"),
    ("dying", "die"),
    ("lying", "lie"),
    ("tying", "tie"),
    ("idly", "idl"),
    ("gently", "gentl"),
    ("ugly", "ugli"),
    ("early", "earli"),
    ("only", "onli"),
    ("singly", "singl"),
    ("sky", "sky"),
    ("news", "news"),
    ("howe", "howe"),
    ("atlas", "atlas"),
    ("cosmos", "cosmos"),
    ("bias", "bias"),
    ("andes", "andes"),
];

/// Words left untouched once step 1a has run.
const POST_1A_INVARIANTS: &[&str] = &[
    "inning", "outing", "canning", "herring", "earring", "proceed", "exceed", "succeed",
];

const R1_PREFIXES: &[&str] = &["gener", "commun", "arsen"];

const STEP2: &[(&str, &str)] = &[
    ("ational", "ate"),
    ("tional", "tion"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("abli", "able"),
    ("entli", "ent"),
    ("ization", "ize"),
    ("izer", "ize"),
    ("ation", "ate"),
    ("ator", "ate"),
    ("alism", "al"),
    ("aliti", "al"),
    ("alli", "al"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("ousli", "ous"),
    ("iveness", "ive"),
    ("iviti", "ive"),
    ("biliti", "ble"),
    ("bli", "ble"),
    ("ogi", "og"),
    ("fulli", "ful"),
    ("lessli", "less"),
    ("li", ""),
];

const STEP3: &[(&str, &str)] = &[
    ("ational", "ate"),
    ("tional", "tion"),
    ("alize", "al"),
    ("icate", "ic"),
    ("iciti", "ic"),
    ("ical", "ic"),
    ("ful", ""),
    ("ness", ""),
    ("ative", ""),
];

const STEP4: &[&str] = &[
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ism", "ate",
    "iti", "ous", "ive", "ize", "ion",
];

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

fn is_double(pair: &[char]) -> bool {
    pair.len() == 2 && pair[0] == pair[1] && matches!(pair[0], 'b' | 'd' | 'f' | 'g' | 'm' | 'n' | 'p' | 'r' | 't')
}

fn is_valid_li(c: char) -> bool {
    matches!(c, 'c' | 'd' | 'e' | 'g' | 'h' | 'k' | 'm' | 'n' | 'r' | 't')
}

struct Word {
    chars: Vec<char>,
    r1: usize,
    r2: usize,
}

impl Word {
    fn ends_with(&self, suffix: &str) -> bool {
        let n = suffix.chars().count();
        n <= self.chars.len() && self.chars[self.chars.len() - n..].iter().copied().eq(suffix.chars())
    }

    /// Longest entry of `suffixes` that ends the word.
    fn longest_suffix<'a, I>(&self, suffixes: I) -> Option<&'a str>
    where
        I: IntoIterator<Item = &'a str>,
    {
        suffixes
            .into_iter()
            .filter(|s| self.ends_with(s))
            .max_by_key(|s| s.len())
    }

    fn suffix_start(&self, suffix: &str) -> usize {
        self.chars.len() - suffix.chars().count()
    }

    fn replace_suffix(&mut self, suffix: &str, replacement: &str) {
        let start = self.suffix_start(suffix);
        self.chars.truncate(start);
        self.chars.extend(replacement.chars());
    }

    fn has_vowel(&self, range: std::ops::Range<usize>) -> bool {
        self.chars[range].iter().any(|&c| is_vowel(c))
    }

    /// Whether `chars[..end]` ends in a short syllable.
    fn ends_in_short_syllable(&self, end: usize) -> bool {
        let c = &self.chars[..end];
        match c.len() {
            0 | 1 => false,
            2 => is_vowel(c[0]) && !is_vowel(c[1]),
            n => {
                let (a, b, d) = (c[n - 3], c[n - 2], c[n - 1]);
                !is_vowel(a) && is_vowel(b) && !is_vowel(d) && !matches!(d, 'w' | 'x' | 'Y')
            }
        }
    }

    fn is_short(&self) -> bool {
        self.r1 >= self.chars.len() && self.ends_in_short_syllable(self.chars.len())
    }
}

/// Position after the first non-vowel that follows a vowel, searching from `from`.
fn region_start(chars: &[char], from: usize) -> usize {
    let mut i = from;
    while i < chars.len() && !is_vowel(chars[i]) {
        i += 1;
    }
    while i < chars.len() && is_vowel(chars[i]) {
        i += 1;
    }
    if i < chars.len() {
        i + 1
    } else {
        chars.len()
    }
}

pub fn stem(word: &str) -> String {
    if let Some((_, out)) = EXCEPTIONS.iter().find(|(w, _)| *w == word) {
        return (*out).to_string();
    }
    if word.chars().count() < 3 {
        return word.to_string();
    }

    let mut chars: Vec<char> = word.chars().collect();

    // Prelude: drop a leading apostrophe, mark consonantal y.
    if chars.first() == Some(&'\'') {
        chars.remove(0);
    }
    if chars.first() == Some(&'y') {
        chars[0] = 'Y';
    }
    for i in 1..chars.len() {
        if chars[i] == 'y' && is_vowel(chars[i - 1]) {
            chars[i] = 'Y';
        }
    }

    let prefix = R1_PREFIXES
        .iter()
        .find(|p| chars.len() >= p.len() && chars[..p.len()].iter().copied().eq(p.chars()));
    let r1 = match prefix {
        Some(p) => p.len(),
        None => region_start(&chars, 0),
    };
    let r2 = region_start(&chars, r1);
    let mut w = Word { chars, r1, r2 };

    step0(&mut w);
    step1a(&mut w);

    let lowered: String = w.chars.iter().collect();
    if POST_1A_INVARIANTS.contains(&lowered.as_str()) {
        return lowered;
    }

    step1b(&mut w);
    step1c(&mut w);
    step2(&mut w);
    step3(&mut w);
    step4(&mut w);
    step5(&mut w);

    w.chars.iter().map(|&c| if c == 'Y' { 'y' } else { c }).collect()
}

fn step0(w: &mut Word) {
    if let Some(s) = w.longest_suffix(["'", "'s", "'s'"]) {
        w.replace_suffix(s, "");
    }
}

fn step1a(w: &mut Word) {
    let Some(s) = w.longest_suffix(["sses", "ied", "ies", "s", "us", "ss"]) else {
        return;
    };
    match s {
        "sses" => w.replace_suffix(s, "ss"),
        "ied" | "ies" => {
            if w.suffix_start(s) > 1 {
                w.replace_suffix(s, "i")
            } else {
                w.replace_suffix(s, "ie")
            }
        }
        "s" => {
            let start = w.suffix_start(s);
            if start >= 1 && w.has_vowel(0..start - 1) {
                w.replace_suffix(s, "");
            }
        }
        _ => {}
    }
}

fn step1b(w: &mut Word) {
    let Some(s) = w.longest_suffix(["eed", "eedly", "ed", "edly", "ing", "ingly"]) else {
        return;
    };
    let start = w.suffix_start(s);
    match s {
        "eed" | "eedly" => {
            if start >= w.r1 {
                w.replace_suffix(s, "ee");
            }
        }
        _ => {
            if !w.has_vowel(0..start) {
                return;
            }
            w.replace_suffix(s, "");
            if w.ends_with("at") || w.ends_with("bl") || w.ends_with("iz") {
                w.chars.push('e');
            } else if w.chars.len() >= 2 && is_double(&w.chars[w.chars.len() - 2..]) {
                w.chars.pop();
            } else if w.is_short() {
                w.chars.push('e');
            }
        }
    }
}

fn step1c(w: &mut Word) {
    let n = w.chars.len();
    if n > 2 && matches!(w.chars[n - 1], 'y' | 'Y') && !is_vowel(w.chars[n - 2]) {
        w.chars[n - 1] = 'i';
    }
}

fn step2(w: &mut Word) {
    let Some(s) = w.longest_suffix(STEP2.iter().map(|(s, _)| *s)) else {
        return;
    };
    let start = w.suffix_start(s);
    if start < w.r1 {
        return;
    }
    let replacement = STEP2.iter().find(|(x, _)| *x == s).map(|(_, r)| *r).unwrap_or("");
    match s {
        "ogi" => {
            if start >= 1 && w.chars[start - 1] == 'l' {
                w.replace_suffix(s, replacement);
            }
        }
        "li" => {
            if start >= 1 && is_valid_li(w.chars[start - 1]) {
                w.replace_suffix(s, "");
            }
        }
        _ => w.replace_suffix(s, replacement),
    }
}

fn step3(w: &mut Word) {
    let Some(s) = w.longest_suffix(STEP3.iter().map(|(s, _)| *s)) else {
        return;
    };
    let start = w.suffix_start(s);
    if start < w.r1 {
        return;
    }
    if s == "ative" {
        if start >= w.r2 {
            w.replace_suffix(s, "");
        }
        return;
    }
    let replacement = STEP3.iter().find(|(x, _)| *x == s).map(|(_, r)| *r).unwrap_or("");
    w.replace_suffix(s, replacement);
}

fn step4(w: &mut Word) {
    let Some(s) = w.longest_suffix(STEP4.iter().copied()) else {
        return;
    };
    let start = w.suffix_start(s);
    if start < w.r2 {
        return;
    }
    if s == "ion" {
        if start >= 1 && matches!(w.chars[start - 1], 's' | 't') {
            w.replace_suffix(s, "");
        }
        return;
    }
    w.replace_suffix(s, "");
}

fn step5(w: &mut Word) {
    let n = w.chars.len();
    if n == 0 {
        return;
    }
    let start = n - 1;
    match w.chars[start] {
        'e' => {
            if start >= w.r2 || (start >= w.r1 && !w.ends_in_short_syllable(start)) {
                w.chars.pop();
            }
        }
        'l' if start >= w.r2 && start >= 1 && w.chars[start - 1] == 'l' => {
            w.chars.pop();
        }
        _ => {}
    }
}
