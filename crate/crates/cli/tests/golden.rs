//! Golden-output hashes for every shipped scenario.
//!
//! Determinism is a product property: identical configurations must produce
//! byte-identical files, and those bytes are pinned here by SHA-256. The
//! manifest is only regenerated explicitly:
//!
//! ```text
//! KRFLOW_BLESS=1 cargo test -p krflow-cli --test golden
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use krflow_cli::config::Overrides;
use krflow_cli::scenario::{registry_names, run_scenario};

fn manifest_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden/hashes.json")
}

fn current_hashes() -> BTreeMap<String, String> {
    let mut hashes = BTreeMap::new();
    for name in registry_names() {
        let output = run_scenario(name, &Overrides::default())
            .unwrap_or_else(|e| panic!("scenario {name}: {e:#}"));
        for (file, bytes) in &output.files {
            let digest = Sha256::digest(bytes);
            hashes.insert(format!("{name}/{file}"), format!("{digest:x}"));
        }
    }
    hashes
}

#[test]
fn scenario_outputs_match_golden_hashes() {
    let current = current_hashes();
    let path = manifest_path();
    if std::env::var_os("KRFLOW_BLESS").is_some_and(|v| v == "1") {
        let body = serde_json::to_string_pretty(&current).unwrap();
        fs::write(&path, body + "\n").unwrap();
        println!("blessed {} hashes into {}", current.len(), path.display());
        return;
    }
    let stored: BTreeMap<String, String> = serde_json::from_slice(
        &fs::read(&path).expect("golden manifest missing; bless with KRFLOW_BLESS=1"),
    )
    .unwrap();
    let mut mismatches = Vec::new();
    for (key, hash) in &current {
        match stored.get(key) {
            Some(expected) if expected == hash => {}
            Some(expected) => mismatches.push(format!("{key}: {hash} != stored {expected}")),
            None => mismatches.push(format!("{key}: not in manifest")),
        }
    }
    for key in stored.keys() {
        if !current.contains_key(key) {
            mismatches.push(format!("{key}: in manifest but not produced"));
        }
    }
    assert!(
        mismatches.is_empty(),
        "golden mismatches (bless with KRFLOW_BLESS=1 if intentional):\n{}",
        mismatches.join("\n")
    );
}
