//! End-to-end tests of the `genma` binary: every subcommand, the error
//! paths, and byte-level determinism of training outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_genma"))
}

fn repo_data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small, fast genma configuration on the bundled corpus.
fn small_config(out_dir: &Path, seed: u64) -> String {
    format!(
        "model = \"genma\"\nseed = {seed}\nout = {:?}\nmax_len = 96\n\n\
         [data]\ntrain = {:?}\n\n\
         [hyper]\nembedding = 12\nfilters = 8\nlstm_hidden = 10\ndense = 8\nepochs = 2\n",
        out_dir.display().to_string(),
        repo_data("train_60.sentimix").display().to_string(),
    )
}

fn train_small(dir: &Path, name: &str, seed: u64) -> PathBuf {
    let out_dir = dir.join(name);
    let config_path = dir.join(format!("{name}.toml"));
    fs::write(&config_path, small_config(&out_dir, seed)).unwrap();
    let out = bin().args(["train", "--config"]).arg(&config_path).output().unwrap();
    assert!(out.status.success(), "train failed: {}", stderr(&out));
    out_dir
}

#[test]
fn train_writes_model_history_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = train_small(dir.path(), "run", 7);
    assert!(out_dir.join("model.ckpt").is_file());
    assert!(out_dir.join("history.txt").is_file());
    assert!(out_dir.join("eval.txt").is_file());
    let history = fs::read_to_string(out_dir.join("history.txt")).unwrap();
    assert!(history.starts_with("epoch=1 train_loss="), "{history}");
    assert_eq!(history.lines().count(), 2);
}

#[test]
fn train_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = train_small(dir.path(), "a", 7);
    let second = train_small(dir.path(), "b", 7);
    for name in ["model.ckpt", "history.txt", "eval.txt"] {
        let a = fs::read(first.join(name)).unwrap();
        let b = fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn train_svm_writes_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("svm");
    let out = bin()
        .args(["train", "--model", "svm", "--epochs", "8"])
        .arg("--data")
        .arg(repo_data("train_60.sentimix"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out_dir.join("model.svm").is_file());
    let history = fs::read_to_string(out_dir.join("history.txt")).unwrap();
    assert!(history.starts_with("epoch=1 objective="), "{history}");
    // The word-level features separate the synthetic corpus perfectly.
    let report = fs::read_to_string(out_dir.join("eval.txt")).unwrap();
    assert!(report.contains("macro_f1=1"), "{report}");
}

#[test]
fn eval_reports_table_and_keys() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_small(dir.path(), "run", 7);
    let out = bin()
        .arg("eval")
        .arg(run.join("model.ckpt"))
        .arg("--data")
        .arg(repo_data("train_60.sentimix"))
        .arg("--out")
        .arg(dir.path().join("eval"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let table = stdout(&out);
    for column in ["Pos Class", "Neg Class", "Neut Class", "Score", "Accuracy"] {
        assert!(table.contains(column), "missing `{column}` in {table}");
    }
    let report = fs::read_to_string(dir.path().join("eval/eval.txt")).unwrap();
    for key in ["positive=", "negative=", "neutral=", "macro_f1=", "accuracy="] {
        assert!(report.contains(key), "missing `{key}` in {report}");
    }
}

#[test]
fn eval_rejects_unlabeled_data() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_small(dir.path(), "run", 7);
    let unlabeled = dir.path().join("unlabeled.sentimix");
    fs::write(&unlabeled, "meta u1\ntalo\tl1\nmisu\tl1\n\n").unwrap();
    let out = bin()
        .arg("eval")
        .arg(run.join("model.ckpt"))
        .arg("--data")
        .arg(&unlabeled)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("unlabeled") && err.contains("u1"), "{err}");
    assert_eq!(err.lines().count(), 1, "diagnostic is one line: {err}");
}

#[test]
fn predict_labels_unlabeled_data() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_small(dir.path(), "run", 7);
    let unlabeled = dir.path().join("unlabeled.sentimix");
    fs::write(&unlabeled, "meta u1\ntalo\tl1\n\nmeta u2\ngupan\tl2\n\n").unwrap();
    let out = bin()
        .arg("predict")
        .arg(run.join("model.ckpt"))
        .arg("--data")
        .arg(&unlabeled)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("u1\t"), "{text}");
    let label = lines[0].split('\t').nth(1).unwrap();
    assert!(["positive", "negative", "neutral"].contains(&label), "{text}");
}

#[test]
fn attn_renders_html_and_ansi() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_small(dir.path(), "run", 7);
    let out_dir = dir.path().join("attn");
    let out = bin()
        .arg("attn")
        .arg(run.join("model.ckpt"))
        .arg("--data")
        .arg(repo_data("separable_30.sentimix"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("\u{1b}["), "no ANSI escapes in {text}");
    assert!(text.contains("sep01"), "{text}");
    let html = fs::read_to_string(out_dir.join("attention.html")).unwrap();
    assert!(html.contains("<html"), "{html}");
    assert!(out_dir.join("attention.ansi").is_file());
}

#[test]
fn attn_rejects_svm_models() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("svm");
    let out = bin()
        .args(["train", "--model", "svm", "--epochs", "2"])
        .arg("--data")
        .arg(repo_data("train_60.sentimix"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let out = bin()
        .arg("attn")
        .arg(out_dir.join("model.svm"))
        .arg("--data")
        .arg(repo_data("separable_30.sentimix"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("genma checkpoint"), "{}", stderr(&out));
}

#[test]
fn gradcheck_passes_and_detects_injected_fault() {
    let out = bin().args(["gradcheck", "--seed", "3"]).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let report = stdout(&out);
    for layer in [
        "embedding-learned",
        "conv1d",
        "maxpool",
        "bilstm",
        "self-attention",
        "dense",
        "softmax",
        "cross-entropy",
    ] {
        assert!(report.contains(layer), "missing `{layer}` in {report}");
    }
    assert!(report.contains("max_rel_error="), "{report}");
    assert!(!report.contains("FAIL"), "{report}");

    let out = bin()
        .args(["gradcheck", "--seed", "3", "--inject-fault"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stdout(&out).contains("FAIL"), "{}", stdout(&out));
}

#[test]
fn missing_data_path_names_the_path() {
    let out = bin()
        .args(["train", "--data", "/nonexistent/corpus.sentimix"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("/nonexistent/corpus.sentimix"), "{err}");
    assert_eq!(err.lines().count(), 1, "diagnostic is one line: {err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "learning_rate = 0.1\n").unwrap();
    let out = bin().args(["train", "--config"]).arg(&config).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("unknown field"), "{}", stderr(&out));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let config_path = dir.path().join("run.toml");
    fs::write(&config_path, small_config(&out_a, 7)).unwrap();
    // Redirect the output directory and seed from the command line.
    let out_b = dir.path().join("b");
    let out = bin()
        .args(["train", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out_b)
        .args(["--seed", "9"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(!out_a.exists(), "config-file out dir used despite --out");
    assert!(out_b.join("model.ckpt").is_file());
}
