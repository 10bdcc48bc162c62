use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sixpack_core::synthdata::load_dataset;
use sixpack_core::trajectory::load_trajectory;
use tempfile::TempDir;

const SMALL: &str = r#"
categories = ["bowl"]

[data]
train_sequences = 2
test_sequences = 2
train_length = 6
test_length = 12

[train]
steps = 4
batch = 2
train_points = 64
checkpoint_every = 2
calibrate_samples = 4

[model]
max_points = 128
"#;

fn sixpack(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sixpack")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn workspace(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let mut full = vec!["--config", "run.toml"];
    full.extend_from_slice(args);
    let out = sixpack(dir, &full);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    stdout(&out)
}

#[test]
fn help_enumerates_config_keys_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = sixpack(dir.path(), &["--help"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for line in ["  seed = 0", "  data.train_sequences = 16", "  model.keypoints = 8", "  train.weights.w_mvc = 10.0"] {
        assert!(text.contains(line), "missing {line:?}");
    }
    assert!(text.contains("bench.track.max_lost_frames"));
}

#[test]
fn gen_data_writes_every_category_deterministically() {
    let cfg = "[data]\ntrain_sequences = 1\ntest_sequences = 1\ntrain_length = 3\ntest_length = 3\n";
    let a = workspace(cfg);
    let b = workspace(cfg);
    run_ok(a.path(), &["gen-data"]);
    run_ok(b.path(), &["gen-data"]);
    for cat in ["bottle", "bowl", "camera", "can", "laptop", "mug"] {
        for split in ["train", "test"] {
            let name = format!("data/{cat}_{split}.jsonl");
            let ds = load_dataset(&a.path().join(&name)).unwrap();
            assert_eq!(ds.sequences.len(), 1);
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        }
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = workspace(SMALL);
    let overlap = sixpack(dir.path(), &["--config", "run.toml", "--set", "data.test_instance_base=1", "gen-data"]);
    assert_eq!(code(&overlap), 2);
    let unknown = sixpack(dir.path(), &["--config", "run.toml", "--set", "train.stepz=3", "train"]);
    assert_eq!(code(&unknown), 2);
    let missing = sixpack(dir.path(), &["--config", "absent.toml", "gen-data"]);
    assert_eq!(code(&missing), 3);
}

#[test]
fn one_training_step_logs_seven_loss_columns() {
    let dir = workspace(SMALL);
    run_ok(dir.path(), &["gen-data"]);
    run_ok(dir.path(), &["--set", "train.steps=1", "train"]);
    let log = fs::read_to_string(dir.path().join("runs/bowl/loss.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "step,total,mvc,tra,rot,sep,sil,cen,anc");
    assert_eq!(lines[1].split(',').count(), 9);
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let straight = workspace(SMALL);
    run_ok(straight.path(), &["gen-data"]);
    run_ok(straight.path(), &["train"]);

    let resumed = workspace(SMALL);
    run_ok(resumed.path(), &["gen-data"]);
    run_ok(resumed.path(), &["train", "--until", "2"]);
    let out = run_ok(resumed.path(), &["train", "--resume"]);
    assert!(out.contains("resuming"), "{out}");

    for file in ["runs/bowl/model.json", "runs/bowl/loss.csv"] {
        assert_eq!(
            fs::read(straight.path().join(file)).unwrap(),
            fs::read(resumed.path().join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn training_loss_falls_on_a_tiny_dataset() {
    let dir = workspace(SMALL);
    run_ok(dir.path(), &["gen-data"]);
    run_ok(dir.path(), &["--set", "train.steps=200", "--set", "train.checkpoint_every=0", "train"]);
    let log = fs::read_to_string(dir.path().join("runs/bowl/loss.csv")).unwrap();
    let totals: Vec<f64> = log.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(totals.len(), 200);
    let tail = totals[190..].iter().sum::<f64>() / 10.0;
    assert!(tail <= 0.7 * totals[0], "first {} last-10 mean {tail}", totals[0]);
}

#[test]
fn non_finite_training_exits_4() {
    let dir = workspace(SMALL);
    run_ok(dir.path(), &["gen-data"]);
    let out = sixpack(dir.path(), &["--config", "run.toml", "--set", "train.lr=1e300", "train"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn track_and_eval_end_to_end() {
    let dir = workspace(SMALL);
    run_ok(dir.path(), &["gen-data"]);
    let printed = run_ok(dir.path(), &["track", "--method", "oracle"]);
    assert!(printed.contains("fps"));
    run_ok(dir.path(), &["track", "--method", "icp"]);

    let traj = load_trajectory(&dir.path().join("runs/bowl/oracle.traj.jsonl")).unwrap();
    let data = load_dataset(&dir.path().join("data/bowl_test.jsonl")).unwrap();
    for (est, seq) in traj.sequences.iter().zip(&data.sequences) {
        for (e, f) in est.iter().zip(&seq.frames) {
            assert!(e.valid);
            assert!((e.pose.translation - f.gt_pose.translation).norm() < 1e-9);
            assert!((e.pose.rotation.matrix() - f.gt_pose.rotation.matrix()).abs().max() < 1e-9);
        }
    }

    run_ok(dir.path(), &["eval"]);
    let first = fs::read(dir.path().join("runs/report.json")).unwrap();
    let table = fs::read_to_string(dir.path().join("runs/report.txt")).unwrap();
    assert!(table.contains("oracle") && table.contains("icp"));
    let oracle_row = table.lines().find(|l| l.starts_with("bowl")).unwrap();
    let oracle_cols: Vec<&str> = oracle_row.split('|').collect();
    assert_eq!(oracle_cols.last().unwrap().split_whitespace().collect::<Vec<_>>(), ["100.0", "100.0", "0.00", "0.00"]);
    let csv = fs::read_to_string(dir.path().join("runs/report_stability.csv")).unwrap();
    assert!(csv.starts_with("method,category,offset,success_rate\n"));

    run_ok(dir.path(), &["eval"]);
    assert_eq!(first, fs::read(dir.path().join("runs/report.json")).unwrap());
}

#[test]
fn static_sequence_gives_a_nearly_constant_track() {
    let dir = workspace(SMALL);
    run_ok(dir.path(), &["--set", "data.motion_scale=0.0", "--set", "data.test_render.occlusion=0.0", "gen-data"]);
    run_ok(dir.path(), &["--set", "model.max_points=512", "track", "--method", "icp"]);
    let traj = load_trajectory(&dir.path().join("runs/bowl/icp.traj.jsonl")).unwrap();
    for seq in &traj.sequences {
        let first = seq[0].pose.translation;
        for p in seq {
            let drift = (p.pose.translation - first).norm();
            assert!(drift < 0.01, "drift {drift}");
        }
    }
}

#[test]
fn empty_or_mismatched_inputs_exit_2() {
    let dir = workspace(SMALL);
    run_ok(dir.path(), &["gen-data"]);
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let out = sixpack(dir.path(), &["--config", "run.toml", "track", "--method", "icp", "--data", "empty.jsonl"]);
    assert_eq!(code(&out), 2);

    run_ok(dir.path(), &["track", "--method", "oracle"]);
    let out = sixpack(
        dir.path(),
        &["--config", "run.toml", "--set", "data.test_length=5", "eval", "--traj", "runs/bowl/oracle.traj.jsonl", "--data", "data/bowl_train.jsonl"],
    );
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn check_passes_and_a_corrupted_hook_fails() {
    let dir = tempfile::tempdir().unwrap();
    let clean = sixpack(dir.path(), &["check"]);
    assert_eq!(code(&clean), 0, "{}", stdout(&clean));
    assert_eq!(stdout(&clean).lines().filter(|l| l.starts_with("PASS")).count(), 6);

    let out = Command::new(env!("CARGO_BIN_EXE_sixpack"))
        .current_dir(dir.path())
        .env("SIXPACK_CORRUPT", "rotation_error")
        .arg("check")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FAIL rotation_error"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rotation_error"));
}
