use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qrnn_cti::data::Dataset;
use qrnn_cti::model::load_checkpoint;
use serde_json::Value;

const CONFIG: &str = r#"
seed = 7

[synth]
n_features = 8
counts = [120, 120, 120]
normal_rows = 40

[model]
conv1_filters = 8
conv2_filters = 8

[train]
epochs = 2
batch_size = 64

[bench]
warmup_epochs = 1
timed_epochs = 2
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qrnn-cti"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn output_dir(out: &Output) -> PathBuf {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().find_map(|l| l.strip_prefix("output: ")).unwrap_or_else(|| {
        panic!(
            "no output line\nstdout:\n{stdout}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stderr)
        )
    });
    PathBuf::from(line)
}

fn ok(args: &[&str], cwd: &Path) -> PathBuf {
    let out = run(args, cwd);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    cwd.join(output_dir(&out))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn has(v: &Value, keys: &[&str]) {
    for k in keys {
        assert!(v.get(k).is_some(), "missing key {k} in {v}");
    }
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.retain(|k, _| !k.contains("seconds"));
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[test]
fn full_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    std::fs::write(cwd.join("run.toml"), CONFIG).unwrap();

    let synth = ok(&["--config", "run.toml", "synth"], cwd);
    assert!(synth.file_name().unwrap().to_str().unwrap().starts_with("synth-seed7-"));
    let csv = synth.join("dataset.csv");
    let rows = csv_rows(&csv);
    assert_eq!(rows[0][0], "flow_id");
    assert_eq!(rows.len(), 1 + 360 + 40);
    has(&json(&synth.join("synth_summary.json")), &["rows", "n_features", "classes"]);
    assert_eq!(Dataset::load(synth.join("synthetic.qds")).unwrap().len(), 360);

    let pre = ok(
        &[
            "--config",
            "run.toml",
            "preprocess",
            "--csv",
            csv.to_str().unwrap(),
            "--schema",
            synth.join("schema.toml").to_str().unwrap(),
        ],
        cwd,
    );
    let summary = json(&pre.join("preprocess_summary.json"));
    has(&summary, &["rows_read", "attack_rows", "features", "classes"]);
    assert_eq!(summary["rows_read"], 400);
    assert_eq!(summary["attack_rows"], 360);
    let train_qds = pre.join("train.qds");
    let test_qds = pre.join("test.qds");
    assert_eq!(Dataset::load(&test_qds).unwrap().class_counts(), [42, 42, 42]);
    has(&json(&pre.join("scaler.json")), &["columns", "mean", "std"]);
    has(&json(&pre.join("encoder.json")), &["columns"]);

    let train_args = ["--config", "run.toml", "train", "--train", train_qds.to_str().unwrap()];
    let train = ok(&train_args, cwd);
    let report = json(&train.join("train_report.json"));
    has(&report, &["model_kind", "model_config", "param_count", "classes", "training"]);
    assert_eq!(report["training"]["epochs"].as_array().unwrap().len(), 2);
    let ckpt = train.join("model.qckp");
    assert_eq!(load_checkpoint(&ckpt).unwrap().config().n_features, 9);

    // Same config and seed: identical checkpoint and report up to timings.
    let again = ok(&train_args, cwd);
    assert_ne!(again, train);
    assert_eq!(std::fs::read(&ckpt).unwrap(), std::fs::read(again.join("model.qckp")).unwrap());
    let (mut a, mut b) = (report.clone(), json(&again.join("train_report.json")));
    strip_timing(&mut a);
    strip_timing(&mut b);
    assert_eq!(a, b);

    // The echoed config alone reproduces the run.
    let echoed = train.join("config.toml");
    let replay = ok(&["--config", echoed.to_str().unwrap(), "train"], cwd);
    assert_eq!(std::fs::read(&ckpt).unwrap(), std::fs::read(replay.join("model.qckp")).unwrap());

    let eval = ok(
        &[
            "--config",
            "run.toml",
            "eval",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--test",
            test_qds.to_str().unwrap(),
        ],
        cwd,
    );
    let metrics = json(&eval.join("metrics.json"));
    has(&metrics, &["model_kind", "samples", "classification_seconds", "metrics", "auc"]);
    has(&metrics["metrics"], &["total", "per_class", "macro", "micro", "undefined"]);
    let cm = csv_rows(&eval.join("confusion.csv"));
    assert_eq!(cm.len(), 4);
    assert!(cm.iter().all(|r| r.len() == 3));
    let total: u64 = cm[1..].iter().flatten().map(|v| v.parse::<u64>().unwrap()).sum();
    assert_eq!(total, 126);
    let roc = csv_rows(&eval.join("roc.csv"));
    assert_eq!(roc[0], ["class", "threshold", "fpr", "tpr"]);
    assert!(roc[1..].iter().all(|r| r[2].parse::<f64>().is_ok() && r[3].parse::<f64>().is_ok()));

    let bench = ok(
        &[
            "--config",
            "run.toml",
            "bench",
            "--train",
            train_qds.to_str().unwrap(),
            "--test",
            test_qds.to_str().unwrap(),
        ],
        cwd,
    );
    let br = json(&bench.join("bench_report.json"));
    has(&br, &["arms", "ratio", "ratio_label", "reference"]);
    assert_eq!(br["ratio_label"], "hybrid_lstm/hybrid_qrnn");
    assert_eq!(br["arms"][0]["epoch_seconds"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    assert_eq!(run(&["frobnicate"], cwd).status.code(), Some(2));
    assert_eq!(run(&["--config", "missing.toml", "train"], cwd).status.code(), Some(10));
    std::fs::write(cwd.join("bad.toml"), "[train]\nepoch = 3\n").unwrap();
    assert_eq!(run(&["--config", "bad.toml", "train"], cwd).status.code(), Some(10));
    assert_eq!(run(&["eval"], cwd).status.code(), Some(10));

    std::fs::write(cwd.join("junk.qckp"), b"nope").unwrap();
    std::fs::write(cwd.join("junk.qds"), b"nope").unwrap();
    let out = run(&["eval", "--checkpoint", "junk.qckp", "--test", "junk.qds"], cwd);
    assert_eq!(out.status.code(), Some(13));
    assert!(String::from_utf8_lossy(&out.stderr).contains("junk.qckp"));

    std::fs::write(cwd.join("schema.toml"), "[[column]]\nname = \"a\"\nkind = \"numeric\"\n[[column]]\nname = \"y\"\nkind = \"label\"\n[[column]]\nname = \"t\"\nkind = \"traffic-kind\"\n").unwrap();
    std::fs::write(cwd.join("ragged.csv"), "a,y,t\n1,dos,attack\n2,dos\n").unwrap();
    let out = run(&["preprocess", "--csv", "ragged.csv", "--schema", "schema.toml"], cwd);
    assert_eq!(out.status.code(), Some(11));
}

#[test]
fn runs_never_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    std::fs::write(cwd.join("run.toml"), "[synth]\nn_features = 4\ncounts = [5, 5]\nnormal_rows = 0\n").unwrap();
    let a = ok(&["--config", "run.toml", "synth"], cwd);
    let b = ok(&["--config", "run.toml", "synth"], cwd);
    assert_ne!(a, b);
    assert_eq!(
        std::fs::read(a.join("dataset.csv")).unwrap(),
        std::fs::read(b.join("dataset.csv")).unwrap()
    );
}
