//! Finite-difference gradient checks.
//!
//! A layer is checked against the scalar loss `L = <R, forward(x)>` for a
//! fixed random projection `R`; the analytic gradient is `backward(R)`.
//! Each coordinate is compared with the central difference
//! `(L(v + eps) - L(v - eps)) / (2 eps)` using the relative error
//! `|a - n| / max(|a|, |n|, floor)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layers::{
    softmax_cross_entropy, Conv1d, Dense, Dropout, Layer, MaxPool1d, Mode, Relu,
};
use crate::model::{build_hybrid, Model, ModelConfig};
use crate::recurrent::{Gru, Lstm, Pooling, Qrnn};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
pub const DEFAULT_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckResult {
    pub max_rel_error: f64,
    /// Coordinate with the largest error, e.g. `input[3]` or `conv1.weight[7]`.
    pub worst: String,
    pub checked: usize,
}

impl GradCheckResult {
    fn empty() -> Self {
        Self {
            max_rel_error: 0.0,
            worst: String::new(),
            checked: 0,
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64, what: impl FnOnce() -> String) {
        let err = rel_error(analytic, numeric);
        self.checked += 1;
        if err > self.max_rel_error || self.worst.is_empty() {
            self.max_rel_error = err;
            self.worst = what();
        }
    }

    fn merge(&mut self, other: GradCheckResult) {
        self.checked += other.checked;
        if other.max_rel_error > self.max_rel_error || self.worst.is_empty() {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
        }
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DEFAULT_FLOOR)
}

fn projected_loss(layer: &mut dyn Layer, x: &Tensor, proj: &Tensor, mode: Mode) -> Result<f64> {
    layer.forward(x, mode)?.dot(proj)
}

/// Check input and parameter gradients of a single layer.
///
/// `mode` must make the layer deterministic (dropout only in eval mode).
pub fn check_layer(
    layer: &mut dyn Layer,
    x: &Tensor,
    mode: Mode,
    eps: f64,
    rng: &mut SeededRng,
) -> Result<GradCheckResult> {
    let out = layer.forward(x, mode)?;
    let proj = Tensor::randn(out.shape(), 1.0, rng);
    let grad_in = layer.backward(&proj)?;
    let analytic_params: Vec<(String, Tensor)> = layer
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.clone()))
        .collect();

    let mut result = GradCheckResult::empty();
    let mut xv = x.clone();
    for i in 0..x.len() {
        let orig = xv.data()[i];
        xv.data_mut()[i] = orig + eps;
        let plus = projected_loss(layer, &xv, &proj, mode)?;
        xv.data_mut()[i] = orig - eps;
        let minus = projected_loss(layer, &xv, &proj, mode)?;
        xv.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        result.record(grad_in.data()[i], numeric, || format!("input[{i}]"));
    }
    for (k, (name, analytic)) in analytic_params.iter().enumerate() {
        for i in 0..analytic.len() {
            let orig = layer.params()[k].value.data()[i];
            layer.params_mut()[k].value.data_mut()[i] = orig + eps;
            let plus = projected_loss(layer, x, &proj, mode)?;
            layer.params_mut()[k].value.data_mut()[i] = orig - eps;
            let minus = projected_loss(layer, x, &proj, mode)?;
            layer.params_mut()[k].value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            result.record(analytic.data()[i], numeric, || format!("{name}[{i}]"));
        }
    }
    Ok(result)
}

/// Check `d loss / d logits` of the softmax cross-entropy head.
pub fn check_softmax_cross_entropy(
    logits: &Tensor,
    labels: &[usize],
    eps: f64,
) -> Result<GradCheckResult> {
    let (_, _, grad) = softmax_cross_entropy(logits, labels)?;
    let mut result = GradCheckResult::empty();
    let mut lv = logits.clone();
    for i in 0..logits.len() {
        let orig = lv.data()[i];
        lv.data_mut()[i] = orig + eps;
        let plus = softmax_cross_entropy(&lv, labels)?.0;
        lv.data_mut()[i] = orig - eps;
        let minus = softmax_cross_entropy(&lv, labels)?.0;
        lv.data_mut()[i] = orig;
        result.record(grad.data()[i], (plus - minus) / (2.0 * eps), || format!("logits[{i}]"));
    }
    Ok(result)
}

/// Check parameter gradients of a whole model under the mean cross-entropy
/// loss, in eval mode. Only parameters whose name satisfies `select` are
/// perturbed.
pub fn check_model(
    model: &mut Model,
    x: &Tensor,
    labels: &[usize],
    eps: f64,
    select: impl Fn(&str) -> bool,
) -> Result<GradCheckResult> {
    let saved_mode = model.mode();
    model.set_mode(Mode::Eval);
    let loss = |m: &mut Model| -> Result<f64> {
        let logits = m.forward(x)?;
        Ok(softmax_cross_entropy(&logits, labels)?.0)
    };
    let logits = model.forward(x)?;
    let (_, _, grad) = softmax_cross_entropy(&logits, labels)?;
    model.backward(&grad)?;
    let analytic: Vec<(usize, String, Tensor)> = model
        .params()
        .iter()
        .enumerate()
        .filter(|(_, p)| select(&p.name))
        .map(|(k, p)| (k, p.name.clone(), p.grad.clone()))
        .collect();
    if analytic.is_empty() {
        return Err(Error::Config("gradient check selected no parameters".into()));
    }
    let mut result = GradCheckResult::empty();
    for (k, name, g) in &analytic {
        let mut part = GradCheckResult::empty();
        for i in 0..g.len() {
            let orig = model.params()[*k].value.data()[i];
            model.params_mut()[*k].value.data_mut()[i] = orig + eps;
            let plus = loss(model)?;
            model.params_mut()[*k].value.data_mut()[i] = orig - eps;
            let minus = loss(model)?;
            model.params_mut()[*k].value.data_mut()[i] = orig;
            part.record(g.data()[i], (plus - minus) / (2.0 * eps), || format!("{name}[{i}]"));
        }
        result.merge(part);
    }
    model.set_mode(saved_mode);
    Ok(result)
}

/// Check the gradient of `<R, H>` with respect to the initial cell state
/// of a QRNN layer.
pub fn check_qrnn_initial_state(
    layer: &mut Qrnn,
    x: &Tensor,
    c0: &Tensor,
    eps: f64,
    rng: &mut SeededRng,
) -> Result<GradCheckResult> {
    let (h, _) = layer.forward_with_state(x, Some(c0))?;
    let proj = Tensor::randn(h.shape(), 1.0, rng);
    let analytic = layer.backward_full(&proj)?.initial_state;
    let mut result = GradCheckResult::empty();
    let mut cv = c0.clone();
    for i in 0..c0.len() {
        let orig = cv.data()[i];
        cv.data_mut()[i] = orig + eps;
        let plus = layer.forward_with_state(x, Some(&cv))?.0.dot(&proj)?;
        cv.data_mut()[i] = orig - eps;
        let minus = layer.forward_with_state(x, Some(&cv))?.0.dot(&proj)?;
        cv.data_mut()[i] = orig;
        result.record(analytic.data()[i], (plus - minus) / (2.0 * eps), || format!("c0[{i}]"));
    }
    Ok(result)
}

pub const DENSE_TOLERANCE: f64 = 1e-6;
pub const LAYER_TOLERANCE: f64 = 1e-5;
pub const MODEL_TOLERANCE: f64 = 1e-4;

/// One line of the standard gradient-check table.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub check: String,
    pub cases: usize,
    pub max_rel_error: f64,
    pub worst: String,
    pub tolerance: f64,
    pub passed: bool,
}

/// Values spaced at least 0.05 apart in random order, so max pooling has
/// no near-ties.
fn spaced(shape: &[usize], rng: &mut SeededRng) -> Tensor {
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * 0.05).collect();
    rng.shuffle(&mut v);
    Tensor::new(shape.to_vec(), v).expect("valid shape")
}

/// Uniform values with magnitude in [0.01, 1], away from the ReLU kink.
fn off_kink(shape: &[usize], rng: &mut SeededRng) -> Tensor {
    let t = Tensor::rand_uniform(shape, -1.0, 1.0, rng);
    t.map(|x| x.signum() * (0.01 + 0.99 * x.abs()))
}

type Case = Box<dyn Fn(&mut SeededRng) -> Result<GradCheckResult>>;

fn layer_case(
    build: impl Fn(&mut SeededRng) -> Result<Box<dyn Layer>> + 'static,
    input: impl Fn(&mut SeededRng) -> Tensor + 'static,
) -> Case {
    Box::new(move |rng| {
        let mut layer = build(rng)?;
        let x = input(rng);
        check_layer(layer.as_mut(), &x, Mode::Eval, DEFAULT_EPS, rng)
    })
}

fn standard_cases() -> Vec<(&'static str, f64, Vec<Case>)> {
    let randn = |shape: Vec<usize>| move |rng: &mut SeededRng| Tensor::randn(&shape, 1.0, rng);
    let mut rows: Vec<(&'static str, f64, Vec<Case>)> = Vec::new();

    rows.push((
        "dense",
        DENSE_TOLERANCE,
        [(1, 3, 2), (2, 4, 3), (3, 5, 4)]
            .into_iter()
            .map(|(b, i, o)| {
                layer_case(
                    move |rng| Ok(Box::new(Dense::new("dense", i, o, rng)?) as Box<dyn Layer>),
                    randn(vec![b, i]),
                )
            })
            .collect(),
    ));
    rows.push((
        "conv1d",
        LAYER_TOLERANCE,
        [(1, 1, 1, 4, 3), (2, 2, 3, 5, 3), (2, 3, 2, 6, 5)]
            .into_iter()
            .map(|(b, ci, co, l, k)| {
                layer_case(
                    move |rng| {
                        let mut conv = Conv1d::new("conv", ci, co, k, rng)?;
                        // Non-zero biases so the bias path is exercised.
                        let bias = Tensor::randn(&[co], 0.5, rng);
                        conv = Conv1d::from_weights("conv", conv.weight().clone(), bias)?;
                        Ok(Box::new(conv) as Box<dyn Layer>)
                    },
                    randn(vec![b, ci, l]),
                )
            })
            .collect(),
    ));
    rows.push((
        "maxpool1d",
        LAYER_TOLERANCE,
        [(1, 1, 4), (2, 3, 6), (2, 2, 9)]
            .into_iter()
            .map(|(b, c, l)| {
                layer_case(
                    |_| Ok(Box::new(MaxPool1d::new("pool", 2, 2)?) as Box<dyn Layer>),
                    move |rng| spaced(&[b, c, l], rng),
                )
            })
            .collect(),
    ));
    rows.push((
        "relu",
        LAYER_TOLERANCE,
        [vec![1, 5], vec![2, 3, 4], vec![3, 7]]
            .into_iter()
            .map(|shape| {
                layer_case(
                    |_| Ok(Box::new(Relu::new("relu")) as Box<dyn Layer>),
                    move |rng| off_kink(&shape, rng),
                )
            })
            .collect(),
    ));
    rows.push((
        "dropout (eval)",
        LAYER_TOLERANCE,
        [vec![1, 5], vec![2, 3, 4], vec![4, 6]]
            .into_iter()
            .map(|shape| {
                layer_case(
                    |rng| {
                        Ok(Box::new(Dropout::new("dropout", 0.5, rng.derive(1))?)
                            as Box<dyn Layer>)
                    },
                    randn(shape),
                )
            })
            .collect(),
    ));
    rows.push((
        "softmax-ce",
        DENSE_TOLERANCE,
        [(1, 2), (2, 3), (4, 5)]
            .into_iter()
            .map(|(b, c)| {
                Box::new(move |rng: &mut SeededRng| {
                    let logits = Tensor::randn(&[b, c], 2.0, rng);
                    let labels: Vec<usize> = (0..b).map(|_| rng.below(c)).collect();
                    check_softmax_cross_entropy(&logits, &labels, DEFAULT_EPS)
                }) as Case
            })
            .collect(),
    ));
    for (label, pooling) in [
        ("qrnn (fo)", Pooling::Fo),
        ("qrnn (f)", Pooling::F),
        ("qrnn (ifo)", Pooling::Ifo),
    ] {
        rows.push((
            label,
            LAYER_TOLERANCE,
            [(1, 4, 2, 3, 2), (2, 5, 3, 4, 3), (2, 3, 4, 2, 1)]
                .into_iter()
                .map(|(b, t, i, h, k)| {
                    layer_case(
                        move |rng| {
                            Ok(Box::new(Qrnn::new("qrnn", i, h, k, pooling, rng)?)
                                as Box<dyn Layer>)
                        },
                        randn(vec![b, t, i]),
                    )
                })
                .collect(),
        ));
    }
    rows.push((
        "qrnn initial state",
        LAYER_TOLERANCE,
        [(1, 4, 2, 3, 2), (2, 5, 3, 4, 3), (2, 3, 4, 2, 1)]
            .into_iter()
            .map(|(b, t, i, h, k)| {
                Box::new(move |rng: &mut SeededRng| {
                    let mut q = Qrnn::new("qrnn", i, h, k, Pooling::Fo, rng)?;
                    let x = Tensor::randn(&[b, t, i], 1.0, rng);
                    let c0 = Tensor::randn(&[b, h], 1.0, rng);
                    check_qrnn_initial_state(&mut q, &x, &c0, DEFAULT_EPS, rng)
                }) as Case
            })
            .collect(),
    ));
    rows.push((
        "lstm",
        LAYER_TOLERANCE,
        [(1, 3, 2, 2), (2, 4, 3, 3), (2, 5, 2, 4)]
            .into_iter()
            .map(|(b, t, i, h)| {
                layer_case(
                    move |rng| Ok(Box::new(Lstm::new("lstm", i, h, rng)?) as Box<dyn Layer>),
                    randn(vec![b, t, i]),
                )
            })
            .collect(),
    ));
    rows.push((
        "gru",
        LAYER_TOLERANCE,
        [(1, 3, 2, 2), (2, 4, 3, 3), (2, 5, 2, 4)]
            .into_iter()
            .map(|(b, t, i, h)| {
                layer_case(
                    move |rng| Ok(Box::new(Gru::new("gru", i, h, rng)?) as Box<dyn Layer>),
                    randn(vec![b, t, i]),
                )
            })
            .collect(),
    ));
    rows.push((
        "hybrid model (conv1 weights)",
        MODEL_TOLERANCE,
        [2, 3, 4]
            .into_iter()
            .map(|b| {
                Box::new(move |rng: &mut SeededRng| {
                    let mut cfg = ModelConfig::new(8, 3);
                    cfg.seed = rng.below(1 << 30) as u64;
                    let mut model = build_hybrid(&cfg)?;
                    let x = Tensor::randn(&[b, 8], 1.0, rng);
                    let labels: Vec<usize> = (0..b).map(|_| rng.below(3)).collect();
                    check_model(&mut model, &x, &labels, DEFAULT_EPS, |n| n == "conv1.weight")
                }) as Case
            })
            .collect(),
    ));
    rows
}

/// Run every standard check for each seed and summarise one row per check.
pub fn standard_suite(seeds: &[u64]) -> Result<Vec<SuiteRow>> {
    let mut out = Vec::new();
    for (label, tolerance, cases) in standard_cases() {
        let mut total = GradCheckResult::empty();
        let mut count = 0;
        for &seed in seeds {
            for (k, case) in cases.iter().enumerate() {
                let mut rng = SeededRng::new(seed).derive(k as u64);
                let mut r = case(&mut rng)?;
                r.worst = format!("seed {seed} case {k}: {}", r.worst);
                total.merge(r);
                count += 1;
            }
        }
        out.push(SuiteRow {
            check: label.to_owned(),
            cases: count,
            passed: total.max_rel_error < tolerance,
            max_rel_error: total.max_rel_error,
            worst: total.worst,
            tolerance,
        });
    }
    Ok(out)
}
