//! Training-time benchmark of recurrent variants of the hybrid model.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::AveragedMetrics;
use super::trainer::{evaluate, train, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{build_baseline, build_hybrid, BaselineKind, Model, ModelConfig};
use crate::recurrent::RecurrentKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Leading epochs excluded from the timing statistics.
    pub warmup_epochs: usize,
    /// Epochs whose wall times enter the median.
    pub timed_epochs: usize,
    pub eval_batch_size: usize,
    /// Further models timed on the same data; they do not enter the ratio.
    pub baselines: Vec<BaselineKind>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            warmup_epochs: 1,
            timed_epochs: 5,
            eval_batch_size: 256,
            baselines: Vec::new(),
        }
    }
}

/// Reference LSTM/QRNN epoch-time ratios shown next to the measured one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRatio {
    pub dataset: String,
    pub lstm_seconds: f64,
    pub qrnn_seconds: f64,
    pub ratio: f64,
}

pub fn reference_ratios() -> Vec<ReferenceRatio> {
    [("BoT-IoT", 1717.4, 1299.1), ("TON_IoT", 86.3, 66.5)]
        .into_iter()
        .map(|(d, l, q)| ReferenceRatio {
            dataset: d.into(),
            lstm_seconds: l,
            qrnn_seconds: q,
            ratio: l / q,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub model: String,
    /// Recurrent kind of the hybrid arms; absent for extra baselines.
    pub recurrent_kind: Option<RecurrentKind>,
    pub warmup_seconds: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub median_epoch_seconds: f64,
    pub mean_epoch_seconds: f64,
    pub classification_seconds: f64,
    pub final_loss: f64,
    #[serde(rename = "macro")]
    pub macro_avg: AveragedMetrics,
    #[serde(rename = "micro")]
    pub micro_avg: AveragedMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub bench: BenchConfig,
    pub train_samples: usize,
    pub test_samples: usize,
    pub arms: Vec<ArmReport>,
    pub baselines: Vec<ArmReport>,
    /// Median epoch time of the second arm over the first.
    pub ratio: f64,
    pub ratio_label: String,
    pub reference: Vec<ReferenceRatio>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Arms may differ only in `recurrent_kind`.
pub fn validate_arms(configs: &[ModelConfig]) -> Result<()> {
    let Some(first) = configs.first() else {
        return Err(Error::BenchmarkValidity("no benchmark arms".into()));
    };
    let mut base = first.clone();
    base.recurrent_kind = RecurrentKind::Qrnn;
    for c in &configs[1..] {
        let mut other = c.clone();
        other.recurrent_kind = RecurrentKind::Qrnn;
        if other != base {
            return Err(Error::BenchmarkValidity(format!(
                "arms differ beyond the recurrent kind: {first:?} vs {c:?}"
            )));
        }
    }
    Ok(())
}

/// Train and evaluate one hybrid model per config on identical data and
/// training settings.
pub fn benchmark(
    configs: &[ModelConfig],
    train_cfg: &TrainConfig,
    bench: &BenchConfig,
    train_ds: &Dataset,
    test_ds: &Dataset,
) -> Result<BenchReport> {
    validate_arms(configs)?;
    if configs.len() < 2 {
        return Err(Error::BenchmarkValidity("need at least two arms".into()));
    }
    if bench.timed_epochs == 0 {
        return Err(Error::Config("timed_epochs must be at least 1".into()));
    }
    let cfg = TrainConfig {
        epochs: bench.warmup_epochs + bench.timed_epochs,
        ..train_cfg.clone()
    };
    let mut arms = Vec::with_capacity(configs.len());
    for mc in configs {
        let model = build_hybrid(mc)?;
        arms.push(run_arm(model, Some(mc.recurrent_kind), &cfg, bench, train_ds, test_ds)?);
    }
    let mut baselines = Vec::with_capacity(bench.baselines.len());
    for &kind in &bench.baselines {
        let model = build_baseline(kind, &configs[0])?;
        baselines.push(run_arm(model, None, &cfg, bench, train_ds, test_ds)?);
    }
    let ratio = arms[1].median_epoch_seconds / arms[0].median_epoch_seconds;
    let ratio_label = format!("{}/{}", arms[1].model, arms[0].model);
    Ok(BenchReport {
        model: configs[0].clone(),
        train: cfg,
        bench: bench.clone(),
        train_samples: train_ds.len(),
        test_samples: test_ds.len(),
        arms,
        baselines,
        ratio,
        ratio_label,
        reference: reference_ratios(),
    })
}

fn run_arm(
    mut model: Model,
    recurrent_kind: Option<RecurrentKind>,
    cfg: &TrainConfig,
    bench: &BenchConfig,
    train_ds: &Dataset,
    test_ds: &Dataset,
) -> Result<ArmReport> {
    let report = train(&mut model, train_ds, cfg)?;
    let eval = evaluate(&mut model, test_ds, bench.eval_batch_size)?;
    let secs: Vec<f64> = report.epochs.iter().map(|e| e.seconds).collect();
    let (warm, timed) = secs.split_at(bench.warmup_epochs);
    Ok(ArmReport {
        model: model.kind().to_string(),
        recurrent_kind,
        warmup_seconds: warm.to_vec(),
        epoch_seconds: timed.to_vec(),
        median_epoch_seconds: median(timed),
        mean_epoch_seconds: timed.iter().sum::<f64>() / timed.len() as f64,
        classification_seconds: eval.classification_seconds,
        final_loss: report.epochs.last().map_or(f64::NAN, |e| e.loss),
        macro_avg: eval.metrics.macro_avg,
        micro_avg: eval.metrics.micro_avg,
    })
}

/// The standard comparison: QRNN arm first, LSTM arm second, so the ratio
/// is LSTM over QRNN.
pub fn benchmark_qrnn_vs_lstm(
    base: &ModelConfig,
    train_cfg: &TrainConfig,
    bench: &BenchConfig,
    train_ds: &Dataset,
    test_ds: &Dataset,
) -> Result<BenchReport> {
    let arm = |kind| ModelConfig {
        recurrent_kind: kind,
        ..base.clone()
    };
    benchmark(
        &[arm(RecurrentKind::Qrnn), arm(RecurrentKind::Lstm)],
        train_cfg,
        bench,
        train_ds,
        test_ds,
    )
}

impl BenchReport {
    /// Plain-text table: one row per arm, then the ratio line.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<13} {:>16} {:>18} {:>20} {:>9} {:>8}",
            "Model", "Avg epoch (s)", "Median epoch (s)", "Classification (s)", "Accuracy", "Macro-F"
        );
        for a in self.arms.iter().chain(&self.baselines) {
            let _ = writeln!(
                s,
                "{:<13} {:>16.4} {:>18.4} {:>20.4} {:>9.4} {:>8.4}",
                a.model,
                a.mean_epoch_seconds,
                a.median_epoch_seconds,
                a.classification_seconds,
                a.micro_avg.accuracy,
                a.macro_avg.fscore
            );
        }
        let refs: Vec<String> = self
            .reference
            .iter()
            .map(|r| format!("{:.2} {}", r.ratio, r.dataset))
            .collect();
        let _ = writeln!(
            s,
            "ratio {}: {:.3} (reference: {})",
            self.ratio_label,
            self.ratio,
            refs.join(", ")
        );
        s
    }
}
