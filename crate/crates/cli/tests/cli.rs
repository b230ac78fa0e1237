use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn gmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmc"))
        .args(args)
        .env("GMC_THREADS", "2")
        .output()
        .unwrap()
}

/// Small classification config under `dir`; `extra` is appended to `[train]`.
fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let f = fixtures();
    let text = format!(
        "[dataset]\nmanifest = {}\nmol2_dir = {}\ntask = classification\n\n\
         [model]\ndepth = 2\nmessage_hidden = 16\nffn_hidden = 12\n\n\
         [train]\nepochs = 6\nbatch_size = 16\n{extra}\n\n\
         [study]\nseeds = 3, 4\nout = out\n",
        f.join("cls_manifest.csv").display(),
        f.join("mol2").display(),
    );
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn usage_errors_exit_one() {
    let o = gmc(&["train", "--no-such-flag"]);
    assert_eq!(code(&o), 1);
    let o = gmc(&["frobnicate"]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&gmc(&["--help"])), 0);
    assert_eq!(code(&gmc(&["--version"])), 0);
}

#[test]
fn config_errors_exit_one_with_a_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "[model]\nmesage_hidden = 300\n").unwrap();
    let o = gmc(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = text(&o.stderr);
    assert!(err.contains("message_hidden"), "{err}");

    let o = gmc(&[
        "train",
        "--config",
        dir.path().join("absent.cfg").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_dataset_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "[dataset]\nmanifest = nowhere.csv\nmol2_dir = .\n").unwrap();
    let o = gmc(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("nowhere.csv"));
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    let o = gmc(&["train", "--config", cfg]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let out = text(&o.stdout);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("metric,seed,value"));
    assert!(lines.next().unwrap().starts_with("auc,3,"));
    // train uses only the first configured seed unless told otherwise
    let ckpt = dir.path().join("out/seed_3/model.gmcm");
    assert!(ckpt.is_file());
    assert!(!dir.path().join("out/seed_4").exists());

    let pred_out = dir.path().join("pred");
    let o = gmc(&[
        "predict",
        "--config",
        cfg,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        pred_out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stdout).starts_with("auc "));
    let table = std::fs::read_to_string(pred_out.join("predictions.csv")).unwrap();
    assert_eq!(table.lines().count(), 41);
}

#[test]
fn evaluate_summarizes_every_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = gmc(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--seeds",
        "3, 4, 8",
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert_eq!(
        out.lines()
            .filter(|l| l.starts_with("auc,")
                && !l.contains("mean")
                && !l.contains("std")
                && !l.contains("ci_"))
            .count(),
        3
    );
    assert!(out.contains("auc,mean,"));
    assert!(dir.path().join("out/report.csv").is_file());
}

#[test]
fn split_writes_one_file_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = gmc(&[
        "split",
        "--config",
        cfg.to_str().unwrap(),
        "--seeds",
        "0..2",
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    for s in 0..=2 {
        assert!(dir.path().join(format!("out/split_seed_{s}.csv")).is_file());
    }
    assert_eq!(text(&o.stdout).lines().count(), 3);
    let o = gmc(&[
        "split",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
        "--seeds",
        "0..2",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "max_lr = 1e3");
    let o = gmc(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("diverged"));
}

#[test]
fn featurize_reports_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cache = dir.path().join("cache");
    let o = gmc(&[
        "featurize",
        "--config",
        cfg.to_str().unwrap(),
        "--cache",
        cache.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stdout).starts_with("featurized 40 molecules"));
    let files: Vec<_> = std::fs::read_dir(&cache).unwrap().collect();
    assert_eq!(files.len(), 1);
    let features = std::fs::read_to_string(dir.path().join("out/features.csv")).unwrap();
    assert!(features.lines().skip(1).all(|l| l.ends_with(",187")));
}
