//! Locating the Snowball English reference vocabulary.

use std::path::PathBuf;

/// Directory holding the Snowball English reference vocabulary
/// (`voc_en.txt` + `res_en.txt`).
///
/// Looked up in `SNOWBALL_EN_VOCAB_DIR`, then `crates/testkit/data/snowball`
/// (see `scripts/fetch-snowball-vocab.sh`), then the `rust-stemmers`
/// sources in the cargo registry (a dependency of this crate), which ship
/// the same files.
pub fn snowball_vocab_dir() -> Option<PathBuf> {
    let has_files = |d: &PathBuf| d.join("voc_en.txt").is_file() && d.join("res_en.txt").is_file();
    if let Ok(dir) = std::env::var("SNOWBALL_EN_VOCAB_DIR") {
        let dir = PathBuf::from(dir);
        if has_files(&dir) {
            return Some(dir);
        }
    }
    let local = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/snowball");
    if has_files(&local) {
        return Some(local);
    }
    let cargo_home = std::env::var("CARGO_HOME")
        .map(PathBuf::from)
        .or_else(|_| std::env::var("HOME").map(|h| PathBuf::from(h).join(".cargo")))
        .ok()?;
    let registry = cargo_home.join("registry/src");
    let mut candidates: Vec<PathBuf> = std::fs::read_dir(registry)
        .ok()?
        .flatten()
        .flat_map(|index| std::fs::read_dir(index.path()).into_iter().flatten().flatten())
        .filter(|e| e.file_name().to_string_lossy().starts_with("rust-stemmers-"))
        .map(|e| e.path().join("test_data"))
        .filter(has_files)
        .collect();
    candidates.sort();
    candidates.pop()
}

pub fn snowball_vocab() -> Vec<(String, String)> {
    let dir = snowball_vocab_dir().expect(
        "Snowball English vocabulary not found; run scripts/fetch-snowball-vocab.sh or set SNOWBALL_EN_VOCAB_DIR",
    );
    let voc = std::fs::read_to_string(dir.join("voc_en.txt")).unwrap();
    let res = std::fs::read_to_string(dir.join("res_en.txt")).unwrap();
    let words: Vec<&str> = voc.lines().collect();
    let stems: Vec<&str> = res.lines().collect();
    assert_eq!(words.len(), stems.len(), "vocabulary and result files differ in length");
    words.into_iter().zip(stems).map(|(w, s)| (w.to_string(), s.to_string())).collect()
}
