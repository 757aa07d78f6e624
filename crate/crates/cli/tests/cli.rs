use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &[&str] = &[
    "split.cohort_size=80",
    "split.train=30",
    "split.val=10",
    "split.test=40",
    "model.epochs=2",
    "benchmark.asymmetry.n=12",
    "benchmark.interrupted_n=6",
    "detect.k_folds=3",
    "detect.repeats=2",
    "explore.steps=3",
];

fn foldscan(dir: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_foldscan"));
    cmd.current_dir(dir).args(args);
    for s in SMALL {
        cmd.args(["--set", s]);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn stage_without_upstream_exits_3() {
    let dir = TempDir::new().unwrap();
    let out = foldscan(dir.path(), &["detect"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("preprocess"));
}

#[test]
fn config_errors_exit_4() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&foldscan(dir.path(), &["synth", "--set", "model.no_such_key=1"])), 4);
    assert_eq!(code(&foldscan(dir.path(), &["synth", "--set", "benchmark.split_ratio=2"])), 4);
    std::fs::write(dir.path().join("bad.json"), r#"{"version": 99}"#).unwrap();
    assert_eq!(code(&foldscan(dir.path(), &["synth", "--config", "bad.json"])), 4);
    std::fs::write(dir.path().join("broken.json"), "{").unwrap();
    assert_eq!(code(&foldscan(dir.path(), &["synth", "--config", "broken.json"])), 4);
}

#[test]
fn missing_config_file_exits_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&foldscan(dir.path(), &["synth", "--config", "absent.json"])), 2);
}

#[test]
fn locked_workdir_exits_2() {
    let dir = TempDir::new().unwrap();
    std::fs::create_dir_all(dir.path().join("work")).unwrap();
    std::fs::write(dir.path().join("work/.lock"), "").unwrap();
    let out = foldscan(dir.path(), &["synth"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
}

#[test]
fn printed_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let first = foldscan(dir.path(), &["config", "--seed", "17"]);
    assert_eq!(code(&first), 0);
    std::fs::write(dir.path().join("c.json"), &first.stdout).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_foldscan"));
    let second = cmd.current_dir(dir.path()).args(["config", "--config", "c.json"]).output().unwrap();
    assert_eq!(code(&second), 0);
    assert_eq!(first.stdout, second.stdout);
    assert!(String::from_utf8_lossy(&first.stdout).contains("\"seed\": 17"));
}

#[test]
fn synth_rerun_is_identical_and_seed_changes_it() {
    let dir = TempDir::new().unwrap();
    let read = || std::fs::read(dir.path().join("work/synth/cohort.json")).unwrap();
    assert_eq!(code(&foldscan(dir.path(), &["synth"])), 0);
    let a = read();
    assert_eq!(code(&foldscan(dir.path(), &["synth"])), 0);
    assert_eq!(a, read());
    assert_eq!(code(&foldscan(dir.path(), &["synth", "--seed", "9"])), 0);
    assert_ne!(a, read());
    assert!(!dir.path().join("work/.lock").exists());
}

#[test]
fn small_pipeline_writes_every_stage() {
    let dir = TempDir::new().unwrap();
    let out = foldscan(dir.path(), &["run"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let work = dir.path().join("work");
    for stage in ["synth", "preprocess", "train", "benchmark", "detect", "explore", "report"] {
        assert!(work.join(stage).join("stage.json").is_file(), "{stage} incomplete");
    }
    let report = std::fs::read_to_string(work.join("report/report.md")).unwrap();
    assert!(report.contains("| asymmetry |"));
    assert!(report.contains("| interrupted |"));
    assert!(report.contains("train/model.fvae"));
    let hashes: serde_json::Value =
        serde_json::from_slice(&std::fs::read(work.join("report/hashes.json")).unwrap()).unwrap();
    let model = std::fs::read(work.join("train/model.fvae")).unwrap();
    use sha2::Digest;
    assert_eq!(hashes["train/model.fvae"], hex::encode(sha2::Sha256::digest(&model)));

    // Re-running a middle stage invalidates nothing upstream and reproduces its output.
    let before = std::fs::read(work.join("detect/summary.json")).unwrap();
    assert_eq!(code(&foldscan(dir.path(), &["detect"])), 0);
    assert_eq!(before, std::fs::read(work.join("detect/summary.json")).unwrap());
}
