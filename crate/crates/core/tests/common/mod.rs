//! Reference implementations shared by the oracle and acceptance targets.
#![allow(dead_code)]

use qrnn_cti::Tensor;

pub fn naive_conv(x: &Tensor, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (n, ci, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (co, k) = (w.shape()[0], w.shape()[2]);
    let pad = k / 2;
    let mut y = vec![0.0; n * co * len];
    for s in 0..n {
        for o in 0..co {
            for t in 0..len {
                let mut acc = b.data()[o];
                for i in 0..ci {
                    for j in 0..k {
                        let src = t as isize + j as isize - pad as isize;
                        if src >= 0 && (src as usize) < len {
                            acc += w.get(&[o, i, j]) * x.get(&[s, i, src as usize]);
                        }
                    }
                }
                y[(s * co + o) * len + t] = acc;
            }
        }
    }
    y
}

pub fn scalar_fo_pool(z: &Tensor, f: &Tensor, o: &Tensor, c0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (b, t, h) = (z.shape()[0], z.shape()[1], z.shape()[2]);
    let mut out = vec![0.0; b * t * h];
    let mut last = vec![0.0; b * h];
    for n in 0..b {
        for u in 0..h {
            let mut c = c0[n * h + u];
            for s in 0..t {
                let i = (n * t + s) * h + u;
                c = f.data()[i] * c + (1.0 - f.data()[i]) * z.data()[i];
                out[i] = o.data()[i] * c;
            }
            last[n * h + u] = c;
        }
    }
    (out, last)
}

pub struct Brute {
    pub per_class: Vec<[f64; 6]>,
    pub macro_avg: [f64; 6],
    pub micro_avg: [f64; 6],
}

fn div(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Recount one-vs-rest outcomes straight from the label pairs. Each row is
/// accuracy, tpr, fpr, precision, recall, fscore.
pub fn brute(truth: &[usize], pred: &[usize], classes: usize) -> Brute {
    let n = truth.len() as u64;
    let mut per_class = Vec::new();
    let (mut stp, mut sfp, mut sfn, mut stn) = (0, 0, 0, 0);
    for c in 0..classes {
        let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for (&t, &p) in truth.iter().zip(pred) {
            match (t == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        stp += tp;
        sfp += fp;
        sfn += fn_;
        stn += tn;
        let (p, r) = (div(tp, tp + fp), div(tp, tp + fn_));
        per_class.push([div(tp + tn, n), r, div(fp, fp + tn), p, r, f1(p, r)]);
    }
    let mut macro_avg = [0.0; 6];
    for row in &per_class {
        for k in 0..6 {
            macro_avg[k] += row[k] / classes as f64;
        }
    }
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as u64;
    let (p, r) = (div(stp, stp + sfp), div(stp, stp + sfn));
    let micro_avg = [div(correct, n), r, div(sfp, sfp + stn), p, r, f1(p, r)];
    Brute {
        per_class,
        macro_avg,
        micro_avg,
    }
}

