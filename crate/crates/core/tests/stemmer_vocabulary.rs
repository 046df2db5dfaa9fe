
use councils_core::textproc::stem;
use proptest::prelude::*;

#[test]
fn snowball_reference_vocabulary() {
    let vocab = councils_testkit::vocab::snowball_vocab();
    assert!(vocab.len() >= 29_000, "vocabulary too small: {}", vocab.len());
    let mismatches: Vec<_> = vocab
        .iter()
        .filter(|(w, expected)| &stem(w) != expected)
        .map(|(w, expected)| format!("{w}: expected {expected}, got {}", stem(w)))
        .collect();
    assert!(mismatches.is_empty(), "{} mismatches, first: {:?}", mismatches.len(), &mismatches[..mismatches.len().min(20)]);
}

#[test]
fn stems_are_idempotent_on_vocabulary_outputs() {
    // Re-stemming a stem is not the identity in general (e.g. "abl" style
    // tails), but it must stay deterministic.
    for (_, s) in councils_testkit::vocab::snowball_vocab().iter().take(2000) {
        assert_eq!(stem(s), stem(s));
    }
}

proptest! {
    // Cross-check against the rust-stemmers port on random lowercase words.
    #[test]
    fn agrees_with_rust_stemmers(word in "[a-z]{1,14}") {
        let other = rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English);
        prop_assert_eq!(stem(&word), other.stem(&word).into_owned());
    }
}
