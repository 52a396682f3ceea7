//! Drives the binary end to end on a small synthetic corpus.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metablocks"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const CONFIG: &str = r#"
seed = 3

[model]
d_model = 8
n_heads = 2
n_layers = 1
d_ff = 16
max_len = 16
vocab_size = 200

[training]
epochs = 2

[forest]
n_trees = 10

[grid]
methods = ["1", "frozen-forest", "10"]
"#;

#[test]
fn synth_featurize_train_eval_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("small.toml"), CONFIG).unwrap();

    let out = ok(
        &[
            "synth",
            "--mode",
            "conflict",
            "--seed",
            "4",
            "--n-per-class",
            "30",
            "--out",
            "corpus.jsonl",
        ],
        d,
    );
    assert!(out.contains("120 messages"));
    assert_eq!(fs::read_to_string(d.join("corpus.jsonl")).unwrap().lines().count(), 120);

    let out = ok(&["featurize", "--corpus", "corpus.jsonl", "--out", "feat.json"], d);
    assert!(out.contains("senders=120 affiliations=120 sender_freq=1 day=7 working_hours=1 rush=50"));
    let feat = metablocks::featurizer::FeaturizerModel::load(d.join("feat.json")).unwrap();
    assert!(out.starts_with(&format!("feature_dim {}:", feat.feature_dim())));

    let train_args = [
        "train",
        "--corpus",
        "corpus.jsonl",
        "--method",
        "blocks-weighted",
        "--config",
        "small.toml",
        "--seed",
        "5",
        "--out",
        "m10.json",
    ];
    let out = ok(&train_args, d);
    assert!(out.contains("test accuracy"));
    let ck = metablocks::harness::Checkpoint::load(d.join("m10.json")).unwrap();
    assert_eq!((ck.method, ck.seed, ck.config.seed), (10, 5, 5));

    let out = ok(&["eval", "--checkpoint", "m10.json", "--corpus", "corpus.jsonl"], d);
    assert!(out.starts_with("method 10"));
    assert!(out.contains("accuracy") && out.contains("precision"));

    let compare = |report: &str| {
        ok(
            &[
                "compare",
                "--corpus",
                "corpus.jsonl",
                "--config",
                "small.toml",
                "--report",
                report,
            ],
            d,
        )
    };
    compare("a.csv");
    compare("b.csv");
    let csv = fs::read_to_string(d.join("a.csv")).unwrap();
    let ids: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids, ["1", "2", "10"]);
    assert!(csv.lines().skip(1).all(|l| l.contains(",corpus,3,")));
    let text = fs::read_to_string(d.join("a.txt")).unwrap();
    assert_eq!(text, fs::read_to_string(d.join("b.txt")).unwrap());
    assert!(text.contains("Method#"));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(!run(&["synth", "--mode", "chaos", "--out", "x.jsonl"], d)
        .status
        .success());
    ok(
        &[
            "synth",
            "--mode",
            "metadata_only",
            "--n-per-class",
            "5",
            "--out",
            "c.jsonl",
        ],
        d,
    );
    let out = run(
        &["train", "--corpus", "c.jsonl", "--method", "42", "--out", "m.json"],
        d,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("42"));
    assert!(
        !run(&["eval", "--checkpoint", "missing.json", "--corpus", "c.jsonl"], d)
            .status
            .success()
    );
    fs::write(d.join("bad.toml"), "[model]\nwidth = 1\n").unwrap();
    assert!(!run(
        &["compare", "--corpus", "c.jsonl", "--config", "bad.toml", "--report", "r.csv"],
        d
    )
    .status
    .success());
}
