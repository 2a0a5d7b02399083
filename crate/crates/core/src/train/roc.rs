//! One-vs-rest ROC curves with trapezoidal AUC.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive. The first point uses +inf.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class: String,
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweep the distinct scores from high to low. Tied scores enter at one
/// threshold, so a block of ties becomes a single diagonal segment.
pub fn roc_points(scores: &[f64], positive: &[bool]) -> Result<(Vec<RocPoint>, f64)> {
    if scores.len() != positive.len() {
        return Err(Error::Data("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("ROC scores must be finite".into()));
    }
    let p = positive.iter().filter(|&&b| b).count() as u64;
    let n = positive.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(Error::UndefinedRoc(format!(
            "need both positive and negative examples, got {p} positive, {n} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    // Twice the area in units of 1/(P*N), kept exact.
    let mut area2: u128 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
        });
    }
    let auc = area2 as f64 / (2 * u128::from(p) * u128::from(n)) as f64;
    Ok((points, auc))
}

/// ROC of class `class` from the score column `scores[:, class]`.
pub fn roc_auc(scores: &Tensor, labels: &[usize], class: usize, name: &str) -> Result<RocCurve> {
    let &[rows, classes] = scores.shape() else {
        return Err(Error::Shape("scores must be (n, classes)".into()));
    };
    if class >= classes || labels.len() != rows {
        return Err(Error::Shape(format!(
            "class {class} / {} labels do not fit scores {:?}",
            labels.len(),
            scores.shape()
        )));
    }
    let column: Vec<f64> = scores.data().chunks(classes).map(|r| r[class]).collect();
    let positive: Vec<bool> = labels.iter().map(|&l| l == class).collect();
    let (points, auc) = roc_points(&column, &positive)
        .map_err(|e| match e {
            Error::UndefinedRoc(m) => Error::UndefinedRoc(format!("class {name:?}: {m}")),
            other => other,
        })?;
    Ok(RocCurve {
        class: name.to_owned(),
        points,
        auc,
    })
}

/// CSV with columns `class,threshold,fpr,tpr`.
pub fn write_roc_csv(curves: &[RocCurve], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["class", "threshold", "fpr", "tpr"]).map_err(err)?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.class.clone(),
                p.threshold.to_string(),
                p.fpr.to_string(),
                p.tpr.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush()?;
    Ok(())
}
