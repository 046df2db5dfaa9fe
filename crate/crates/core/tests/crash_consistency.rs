//! Kills a real child process in the middle of writes and checks what a
//! fresh `Store` sees afterwards. The child is this test binary re-run with
//! `CRASH_CHILD` set.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use councils_core::cache::sha256_hex;
use councils_core::store::{Collection, Store};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const ID: &str = "victim";

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Doc {
    version: u32,
    payload: String,
    digest: String,
}

fn doc(version: u32) -> Doc {
    // Large enough that a torn write would be visible as a truncated file.
    let payload = format!("{version:08}").repeat(40_000);
    let digest = sha256_hex(payload.as_bytes());
    Doc { version, payload, digest }
}

fn spawn_child(mode: &str, root: &Path) -> std::process::Child {
    Command::new(std::env::current_exe().unwrap())
        .args(["--exact", "child_entry", "--nocapture", "--test-threads=1"])
        .env("CRASH_CHILD", mode)
        .env("CRASH_ROOT", root)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap()
}

/// Runs only inside a child process.
#[test]
fn child_entry() {
    let Ok(mode) = std::env::var("CRASH_CHILD") else {
        return;
    };
    let store = Store::open(std::env::var("CRASH_ROOT").unwrap()).unwrap();
    let mut out = std::io::stdout();
    match mode.as_str() {
        // Stage the new version, announce it, and wait to be killed before
        // the rename.
        "staged" => {
            let staged = store.stage(Collection::Events, ID, &serde_json::to_vec(&doc(2)).unwrap()).unwrap();
            writeln!(out, "STAGED {}", staged.temp_path().display()).unwrap();
            out.flush().unwrap();
            std::thread::sleep(Duration::from_secs(60));
            staged.commit().unwrap();
        }
        // Keep rewriting until killed at an arbitrary point.
        "loop" => {
            writeln!(out, "READY").unwrap();
            out.flush().unwrap();
            for v in 1.. {
                store.put(Collection::Events, ID, &doc(v)).unwrap();
            }
        }
        other => panic!("unknown mode {other}"),
    }
}

fn wait_for(child: &mut std::process::Child, marker: &str) -> String {
    let stdout = child.stdout.as_mut().unwrap();
    for line in BufReader::new(stdout).lines() {
        let line = line.unwrap();
        // libtest prints "test child_entry ... " on the same line first.
        if let Some(at) = line.find(marker) {
            return line[at + marker.len()..].trim().to_string();
        }
    }
    panic!("child exited before printing {marker}");
}

/// The document is absent or a complete, self-consistent version.
fn observe(root: &Path) -> Option<u32> {
    let store = Store::open(root).unwrap();
    match store.get::<Doc>(Collection::Events, ID) {
        Ok(d) => {
            assert_eq!(d.digest, sha256_hex(d.payload.as_bytes()), "torn document");
            assert_eq!(d, doc(d.version));
            assert_eq!(store.list(Collection::Events).unwrap(), [ID]);
            Some(d.version)
        }
        Err(e) if e.is_not_found() => {
            assert!(store.list(Collection::Events).unwrap().is_empty());
            None
        }
        Err(e) => panic!("unreadable document after crash: {e}"),
    }
}

#[test]
fn kill_between_temp_write_and_rename() {
    for trial in 0..100 {
        let dir = tempfile::tempdir().unwrap();
        let had_old = trial % 2 == 0;
        if had_old {
            Store::open(dir.path()).unwrap().put(Collection::Events, ID, &doc(1)).unwrap();
        }
        let mut child = spawn_child("staged", dir.path());
        let temp = wait_for(&mut child, "STAGED");
        child.kill().unwrap();
        child.wait().unwrap();

        assert!(Path::new(&temp).exists(), "temp file should survive the kill");
        assert_eq!(observe(dir.path()), had_old.then_some(1), "trial {trial}");
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.sweep_temp_files().unwrap(), 1);
        assert_eq!(observe(dir.path()), had_old.then_some(1));
    }
}

#[test]
fn kill_at_random_points_during_rewrites() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let dir = tempfile::tempdir().unwrap();
        let mut child = spawn_child("loop", dir.path());
        wait_for(&mut child, "READY");
        std::thread::sleep(Duration::from_millis(rng.random_range(0..40)));
        child.kill().unwrap();
        child.wait().unwrap();
        observe(dir.path());
        Store::open(dir.path()).unwrap().sweep_temp_files().unwrap();
        observe(dir.path());
    }
}
