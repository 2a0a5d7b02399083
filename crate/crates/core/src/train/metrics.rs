//! Confusion matrices and the derived rate metrics.
//!
//! Per class `c` the multiclass matrix is reduced one-vs-rest to binary
//! counts, from which
//!
//! ```text
//! accuracy  = (TP + TN) / (TP + TN + FP + FN)
//! TPR       = recall = TP / (TP + FN)
//! FPR       = FP / (FP + TN)
//! precision = TP / (TP + FP)
//! F         = 2 P R / (P + R)
//! ```
//!
//! A rate whose denominator is zero is reported as 0 and listed in
//! [`MetricsReport::undefined`]. Macro averages are unweighted means over
//! classes. Micro averages pool the binary counts of all classes; micro
//! accuracy is `trace / total`, which for single-label data equals micro
//! precision and micro recall.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let c = classes.len();
        Self {
            classes,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: Vec<String>) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Data(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = Self::new(classes);
        let c = cm.n_classes();
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= c || p >= c {
                return Err(Error::Data(format!("class id out of range for {c} classes")));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn one_vs_rest(&self, c: usize) -> BinaryCounts {
        let tp = self.counts[c][c];
        let row: u64 = self.counts[c].iter().sum();
        let col: u64 = self.counts.iter().map(|r| r[c]).sum();
        let fn_ = row - tp;
        let fp = col - tp;
        BinaryCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }

    /// CSV with a header row of class names followed by `C` rows of counts;
    /// row `i` is true class `i`, column `j` predicted class `j`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.classes).map_err(err)?;
        for row in &self.counts {
            w.write_record(row.iter().map(u64::to_string)).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Macro,
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    pub accuracy: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub averaging: Averaging,
    pub accuracy: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: u64,
    pub correct: u64,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: AveragedMetrics,
    #[serde(rename = "micro")]
    pub micro_avg: AveragedMetrics,
    /// Rates reported as 0 because their denominator was 0, e.g. `precision[dos]`.
    pub undefined: Vec<String>,
}

impl MetricsReport {
    pub fn average(&self, averaging: Averaging) -> &AveragedMetrics {
        match averaging {
            Averaging::Macro => &self.macro_avg,
            Averaging::Micro => &self.micro_avg,
        }
    }
}

fn ratio(num: u64, den: u64, what: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(what.to_owned());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn fscore(p: f64, r: f64, what: &str, undefined: &mut Vec<String>) -> f64 {
    if p + r == 0.0 {
        undefined.push(what.to_owned());
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("confusion matrix is empty".into()));
    }
    let mut undefined = Vec::new();
    let mut per_class = Vec::with_capacity(cm.n_classes());
    let mut pooled = BinaryCounts::default();
    for (c, name) in cm.classes.iter().enumerate() {
        let b = cm.one_vs_rest(c);
        pooled.tp += b.tp;
        pooled.fp += b.fp;
        pooled.fn_ += b.fn_;
        pooled.tn += b.tn;
        let tpr = ratio(b.tp, b.tp + b.fn_, &format!("tpr[{name}]"), &mut undefined);
        let precision = ratio(b.tp, b.tp + b.fp, &format!("precision[{name}]"), &mut undefined);
        let fpr = ratio(b.fp, b.fp + b.tn, &format!("fpr[{name}]"), &mut undefined);
        per_class.push(ClassMetrics {
            class: name.clone(),
            support: b.tp + b.fn_,
            accuracy: (b.tp + b.tn) as f64 / total as f64,
            tpr,
            fpr,
            precision,
            recall: tpr,
            fscore: fscore(precision, tpr, &format!("fscore[{name}]"), &mut undefined),
        });
    }
    let n = per_class.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n;
    let macro_avg = AveragedMetrics {
        averaging: Averaging::Macro,
        accuracy: mean(|m| m.accuracy),
        tpr: mean(|m| m.tpr),
        fpr: mean(|m| m.fpr),
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        fscore: mean(|m| m.fscore),
    };
    let micro_p = ratio(pooled.tp, pooled.tp + pooled.fp, "precision[micro]", &mut undefined);
    let micro_r = ratio(pooled.tp, pooled.tp + pooled.fn_, "tpr[micro]", &mut undefined);
    let micro_avg = AveragedMetrics {
        averaging: Averaging::Micro,
        accuracy: cm.trace() as f64 / total as f64,
        tpr: micro_r,
        fpr: ratio(pooled.fp, pooled.fp + pooled.tn, "fpr[micro]", &mut undefined),
        precision: micro_p,
        recall: micro_r,
        fscore: fscore(micro_p, micro_r, "fscore[micro]", &mut undefined),
    };
    Ok(MetricsReport {
        total,
        correct: cm.trace(),
        per_class,
        macro_avg,
        micro_avg,
        undefined,
    })
}
