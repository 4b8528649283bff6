use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coopvision"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[test]
fn replay_passes_on_frozen_traces_and_fails_on_edits() {
    for g in ["golden_crossing_t5.json", "golden_crossing_t40.json"] {
        let st = bin().arg("replay").arg(fixture(g)).status().unwrap();
        assert_eq!(st.code(), Some(0), "{g}");
    }
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("crossing.toml"), dir.path().join("crossing.toml")).unwrap();
    let text = std::fs::read_to_string(fixture("golden_crossing_t40.json")).unwrap();
    let edited = text.replacen("\"source\": \"reused\"", "\"source\": \"detected\"", 1);
    assert_ne!(text, edited);
    let p = dir.path().join("edited.json");
    std::fs::write(&p, edited).unwrap();
    let st = bin().arg("replay").arg(&p).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn config_errors_exit_with_one() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["validate", "--scenario", "/does/not/exist.toml"],
        vec!["replay", "/does/not/exist.json"],
        vec!["run", "--sweep", "frame_interval", "--values", "1"],
    ];
    for args in cases {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let scenario = fixture("crossing.toml");
    let out = bin()
        .args(["run", "--sweep", "camera_count", "--values", "2,9", "--scenario"])
        .arg(&scenario)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
}

#[test]
fn run_output_defaults_to_env_dir_and_repeats_exactly() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let st = bin()
            .env("COOPVISION_OUT_DIR", dir.path())
            .args(["run", "--scheme", "CEVAS,NoShare", "--sweep", "frame_interval", "--values", "5,10", "--seeds", "1"])
            .arg("--scenario")
            .arg(fixture("crossing.toml"))
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
    }
    for f in ["results.csv", "manifest.json", "summary.txt"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn validate_prints_histograms() {
    let out = bin().args(["validate", "--scenario"]).arg(fixture("crossing.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.contains("camera 0: 80 blocks, Background=24 Incoming=20 Leaving=20 Overlapping=16"), "{s}");
}
