use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vauth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vauth")).args(args).output().unwrap()
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_prints_one_jsonl_cell() {
    let o = vauth(&["run", "--mode", "base", "--strategy", "mitm_relay", "--seed", "4", "--format", "jsonl"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("\"adversary_success\":false"), "{text}");
    assert!(text.contains("AttributeMismatch"));
}

#[test]
fn run_reads_a_config_file() {
    let cfg = repo("scenarios/mitm_sigma.cfg");
    let o = vauth(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("truck:AttributeMismatch"));
}

#[test]
fn checked_in_claims_hold() {
    let claims = repo("scenarios/claims.expect");
    let o = vauth(&["matrix", "--expect", claims.to_str().unwrap(), "--format", "jsonl"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 35);
}

#[test]
fn wrong_claim_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let claims = dir.path().join("wrong.expect");
    std::fs::write(&claims, "fs_dh corrupt_after true\n").unwrap();
    let o = vauth(&["matrix", "--expect", claims.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mismatch: fs_dh corrupt_after"));
}

#[test]
fn bad_input_exits_with_two() {
    let o = vauth(&["run", "--mode", "dh2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma"));
    assert_eq!(vauth(&["run", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(vauth(&["run", "--config", "/nonexistent.cfg"]).status.code(), Some(2));
}

#[test]
fn transcripts_are_written_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = vauth(&[
        "matrix",
        "--mode",
        "base,sigma",
        "--strategy",
        "passive",
        "--transcript-dir",
        dir.path().to_str().unwrap(),
        "--verbose",
    ]);
    assert!(o.status.success());
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["base-passive-base-passive.transcript", "base-passive-sigma-passive.transcript"]);
    let log = std::fs::read_to_string(dir.path().join(&names[1])).unwrap();
    assert!(log.starts_with("# scenario=base-passive-sigma-passive"));
    assert!(log.lines().any(|l| l.contains("SIGMA1")));
}

#[test]
fn explain_narrates_the_verdict() {
    let o = vauth(&["explain", "--mode", "nonce_ack", "--strategy", "repetition_v2", "--seed", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("aborted with NonceMismatch"), "{text}");
    assert!(text.contains("adversary success: false"));
}

#[test]
fn vectors_repeat_and_select_suite() {
    let a = vauth(&["vectors"]);
    assert_eq!(a.stdout, vauth(&["vectors"]).stdout);
    let std = vauth(&["vectors", "--suite", "std-v1"]);
    assert!(stdout(&std).contains("suite=std-v1"));
}
