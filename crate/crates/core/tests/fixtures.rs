//! The files under `fixtures/` are generated by `facegate::synth`. This test
//! fails when they drift; run it with `FACEGATE_BLESS=1` to rewrite them.

use std::path::PathBuf;

use facegate::synth::fixture_files;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn bundled_fixtures_match_generator() {
    let bless = std::env::var_os("FACEGATE_BLESS").is_some();
    let mut stale = Vec::new();
    for (rel, bytes) in fixture_files() {
        let path = root().join(&rel);
        if bless {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &bytes).unwrap();
        } else if std::fs::read(&path).ok().as_deref() != Some(&bytes[..]) {
            stale.push(rel);
        }
    }
    assert!(stale.is_empty(), "out of date (rerun with FACEGATE_BLESS=1): {stale:?}");
}
