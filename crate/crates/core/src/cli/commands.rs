use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use crate::data::{
    generate_synthetic, load_csv, preprocess as run_pipeline, stratified_split, write_flow_csv,
    Dataset, Schema,
};
use crate::error::{Error, Result};
use crate::model::{build_baseline, load_checkpoint, save_checkpoint, BaselineKind, ModelConfig};
use crate::train::{
    benchmark_qrnn_vs_lstm, evaluate, gradcheck::standard_suite, train_with, write_roc_csv,
    MetricsReport, TrainReport,
};

pub(super) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::from(e).in_file(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::from(e).in_file(path))?,
    ))
}

fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    value
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{key} is not set (config file or flag)")))
}

/// Train and test sets from files, or the `[synth]` dataset split under the
/// run seed when no dataset files are configured.
fn datasets(cfg: &RunConfig, need_train: bool, need_test: bool) -> Result<(Option<Dataset>, Option<Dataset>)> {
    let d = &cfg.data;
    if d.train.is_none() && d.test.is_none() {
        let ds = generate_synthetic(&cfg.synth.spec())?;
        let (train, test) = stratified_split(&ds, d.test_fraction, cfg.seed())?;
        return Ok((Some(train), Some(test)));
    }
    let train = if need_train {
        Some(Dataset::load(required(&d.train, "data.train")?)?)
    } else {
        None
    };
    let test = if need_test {
        Some(Dataset::load(required(&d.test, "data.test")?)?)
    } else {
        None
    };
    Ok((train, test))
}

fn model_config(cfg: &RunConfig, ds: &Dataset) -> ModelConfig {
    let mut mc = cfg.model.clone();
    if mc.n_features == 0 {
        mc.n_features = ds.n_features();
    }
    if mc.n_classes == 0 {
        mc.n_classes = ds.n_classes();
    }
    mc
}

#[derive(Serialize)]
struct ClassCount<'a> {
    class: &'a str,
    total: usize,
    train: usize,
    test: usize,
}

fn class_table<'a>(train: &'a Dataset, test: &Dataset) -> Vec<ClassCount<'a>> {
    let (a, b) = (train.class_counts(), test.class_counts());
    train
        .class_names()
        .iter()
        .enumerate()
        .map(|(i, name)| ClassCount {
            class: name,
            total: a[i] + b[i],
            train: a[i],
            test: b[i],
        })
        .collect()
}

fn print_counts(rows: &[ClassCount]) {
    println!("{:<24} {:>10} {:>10} {:>10}", "Class", "Total", "Train", "Test");
    for r in rows {
        println!("{:<24} {:>10} {:>10} {:>10}", r.class, r.total, r.train, r.test);
    }
}

pub(super) fn synth(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let spec = cfg.synth.spec();
    let ds = generate_synthetic(&spec)?;
    let csv_path = dir.join("dataset.csv");
    let schema = write_flow_csv(&ds, cfg.synth.normal_rows, spec.seed, create(&csv_path)?)
        .map_err(|e| e.in_file(&csv_path))?;
    write_text(&dir.join("schema.toml"), &schema.to_toml())?;
    ds.save(dir.join("synthetic.qds"))?;

    #[derive(Serialize)]
    struct Summary<'a> {
        rows: usize,
        normal_rows: usize,
        n_features: usize,
        classes: Vec<(&'a str, usize)>,
    }
    let counts = ds.class_counts();
    let summary = Summary {
        rows: ds.len(),
        normal_rows: cfg.synth.normal_rows,
        n_features: ds.n_features(),
        classes: ds
            .class_names()
            .iter()
            .map(String::as_str)
            .zip(counts.iter().copied())
            .collect(),
    };
    for (name, n) in &summary.classes {
        println!("{name:<24} {n:>10}");
    }
    write_json(&dir.join("synth_summary.json"), &summary)
}

pub(super) fn preprocess(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let csv = required(&cfg.data.csv, "data.csv")?;
    let schema = Schema::load(required(&cfg.data.schema, "data.schema")?)?;
    let table = load_csv(csv, &schema)?;
    let out = run_pipeline(&table, cfg.data.test_fraction, cfg.seed()).map_err(|e| e.in_file(csv))?;
    out.train.save(dir.join("train.qds"))?;
    out.test.save(dir.join("test.qds"))?;
    write_json(&dir.join("encoder.json"), &out.encoder)?;
    write_json(&dir.join("scaler.json"), &out.scaler)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        csv: &'a Path,
        rows_read: usize,
        attack_rows: usize,
        test_fraction: f64,
        seed: u64,
        features: &'a [String],
        classes: Vec<ClassCount<'a>>,
    }
    let classes = class_table(&out.train, &out.test);
    print_counts(&classes);
    write_json(
        &dir.join("preprocess_summary.json"),
        &Summary {
            csv,
            rows_read: table.len(),
            attack_rows: out.train.len() + out.test.len(),
            test_fraction: cfg.data.test_fraction,
            seed: cfg.seed(),
            features: out.train.feature_names(),
            classes,
        },
    )
}

#[derive(Serialize)]
struct TrainRun<'a> {
    model_kind: BaselineKind,
    model_config: &'a ModelConfig,
    param_count: usize,
    classes: &'a [String],
    features: &'a [String],
    training: TrainReport,
}

pub(super) fn train(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let (train_ds, _) = datasets(cfg, true, false)?;
    let ds = train_ds.expect("train set requested");
    let mc = model_config(cfg, &ds);
    let mut model = build_baseline(cfg.model_kind, &mc)?;
    println!(
        "{}: {} parameters, {} samples",
        model.kind(),
        model.param_count(),
        ds.len()
    );
    let report = train_with(&mut model, &ds, &cfg.train, |e| {
        println!(
            "epoch {:>3}  loss {:.6}  accuracy {:.4}  {:.2}s",
            e.epoch, e.loss, e.accuracy, e.seconds
        );
    })?;
    save_checkpoint(&model, dir.join("model.qckp"))?;
    write_json(
        &dir.join("train_report.json"),
        &TrainRun {
            model_kind: model.kind(),
            model_config: &mc,
            param_count: model.param_count(),
            classes: ds.class_names(),
            features: ds.feature_names(),
            training: report,
        },
    )
}

#[derive(Serialize)]
struct EvalRun<'a> {
    model_kind: BaselineKind,
    checkpoint: &'a Path,
    samples: usize,
    classification_seconds: f64,
    metrics: &'a MetricsReport,
    auc: Vec<(&'a str, f64)>,
    roc_undefined: &'a [String],
}

pub(super) fn eval(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let ckpt = required(&cfg.data.checkpoint, "data.checkpoint")?;
    let mut model = load_checkpoint(ckpt)?;
    let (_, test_ds) = datasets(cfg, false, true)?;
    let ds = test_ds.expect("test set requested");
    let e = evaluate(&mut model, &ds, cfg.bench.eval_batch_size)?;
    e.confusion.write_csv(create(&dir.join("confusion.csv"))?)?;
    write_roc_csv(&e.roc, create(&dir.join("roc.csv"))?)?;

    let m = &e.metrics;
    println!(
        "{:<24} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "Class", "Accuracy", "TPR", "FPR", "Precision", "Recall", "F-score"
    );
    let rows = m
        .per_class
        .iter()
        .map(|c| (c.class.as_str(), c.accuracy, c.tpr, c.fpr, c.precision, c.recall, c.fscore))
        .chain([&m.macro_avg, &m.micro_avg].into_iter().map(|a| {
            let label = if a.averaging == crate::train::Averaging::Macro {
                "(macro)"
            } else {
                "(micro)"
            };
            (label, a.accuracy, a.tpr, a.fpr, a.precision, a.recall, a.fscore)
        }));
    for (name, acc, tpr, fpr, p, r, f) in rows {
        println!("{name:<24} {acc:>9.4} {tpr:>9.4} {fpr:>9.4} {p:>9.4} {r:>9.4} {f:>9.4}");
    }
    println!("classification time: {:.4}s", e.classification_seconds);
    write_json(
        &dir.join("metrics.json"),
        &EvalRun {
            model_kind: model.kind(),
            checkpoint: ckpt,
            samples: ds.len(),
            classification_seconds: e.classification_seconds,
            metrics: m,
            auc: e.roc.iter().map(|r| (r.class.as_str(), r.auc)).collect(),
            roc_undefined: &e.roc_undefined,
        },
    )
}

pub(super) fn bench(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let (train_ds, test_ds) = datasets(cfg, true, true)?;
    let (train_ds, test_ds) = (train_ds.expect("train set"), test_ds.expect("test set"));
    let mc = model_config(cfg, &train_ds);
    let report = benchmark_qrnn_vs_lstm(&mc, &cfg.train, &cfg.bench, &train_ds, &test_ds)?;
    print!("{}", report.render_table());
    write_json(&dir.join("bench_report.json"), &report)
}

pub(super) fn gradcheck(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let rows = standard_suite(&cfg.gradcheck.seeds)?;
    println!(
        "{:<30} {:>6} {:>12} {:>10}  result",
        "Check", "Cases", "Max rel err", "Tolerance"
    );
    for r in &rows {
        println!(
            "{:<30} {:>6} {:>12.3e} {:>10.0e}  {}",
            r.check,
            r.cases,
            r.max_rel_error,
            r.tolerance,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    write_json(&dir.join("gradcheck.json"), &rows)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.check.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "gradient check failed: {}",
            failed.join(", ")
        )))
    }
}
