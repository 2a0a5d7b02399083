//! Central finite differences, written independently of the library's own
//! gradient checker, against every layer's analytic backward pass.

use qrnn_cti::layers::{softmax_cross_entropy, Conv1d, Dense, Dropout, Layer, MaxPool1d, Mode, Relu};
use qrnn_cti::model::{build_hybrid, ModelConfig};
use qrnn_cti::recurrent::{Gru, Lstm, Pooling, Qrnn};
use qrnn_cti::{SeededRng, Tensor};

const EPS: f64 = 1e-5;
const SEEDS: [u64; 5] = [11, 12, 13, 14, 15];

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

fn with_entry(t: &Tensor, i: usize, v: f64) -> Tensor {
    let mut d = t.data().to_vec();
    d[i] = v;
    Tensor::new(t.shape().to_vec(), d).unwrap()
}

fn proj_loss<L: Layer>(layer: &mut L, x: &Tensor, r: &Tensor) -> f64 {
    let y = layer.forward(x, Mode::Eval).unwrap();
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Worst relative error over every input entry and every parameter entry of
/// the loss `<r, layer(x)>`.
fn fd_layer<L: Layer>(layer: &mut L, x: &Tensor, rng: &mut SeededRng) -> f64 {
    let y = layer.forward(x, Mode::Eval).unwrap();
    let r = Tensor::randn(y.shape(), 1.0, rng);
    let gx = layer.backward(&r).unwrap();
    let param_grads: Vec<Tensor> = layer.params().iter().map(|p| p.grad.clone()).collect();

    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let v = x.data()[i];
        let up = proj_loss(layer, &with_entry(x, i, v + EPS), &r);
        let dn = proj_loss(layer, &with_entry(x, i, v - EPS), &r);
        worst = worst.max(rel(gx.data()[i], (up - dn) / (2.0 * EPS)));
    }
    for (k, g) in param_grads.iter().enumerate() {
        for i in 0..g.len() {
            let orig = layer.params()[k].value.clone();
            let v = orig.data()[i];
            layer.params_mut()[k].value = with_entry(&orig, i, v + EPS);
            let up = proj_loss(layer, x, &r);
            layer.params_mut()[k].value = with_entry(&orig, i, v - EPS);
            let dn = proj_loss(layer, x, &r);
            layer.params_mut()[k].value = orig;
            worst = worst.max(rel(g.data()[i], (up - dn) / (2.0 * EPS)));
        }
    }
    worst
}

fn sweep(tol: f64, what: &str, mut case: impl FnMut(u64, usize) -> f64) {
    let mut worst = 0.0f64;
    for seed in SEEDS {
        for shape in 0..3 {
            worst = worst.max(case(seed, shape));
        }
    }
    assert!(worst < tol, "{what}: max rel err {worst:e} >= {tol:e}");
}

#[test]
fn dense() {
    let shapes = [(2, 3, 4), (3, 5, 2), (1, 7, 6)];
    sweep(1e-6, "dense", |seed, s| {
        let (b, i, o) = shapes[s];
        let mut rng = SeededRng::new(seed);
        let mut l = Dense::new("d", i, o, &mut rng).unwrap();
        l.params_mut()[1].value = Tensor::randn(&[o], 0.5, &mut rng);
        let x = Tensor::randn(&[b, i], 1.0, &mut rng);
        fd_layer(&mut l, &x, &mut rng)
    });
}

#[test]
fn conv1d() {
    let shapes = [(2, 2, 3, 3, 6), (1, 1, 4, 5, 7), (2, 3, 2, 1, 5)];
    sweep(1e-5, "conv1d", |seed, s| {
        let (b, ci, co, k, len) = shapes[s];
        let mut rng = SeededRng::new(seed);
        let mut l = Conv1d::new("c", ci, co, k, &mut rng).unwrap();
        let x = Tensor::randn(&[b, ci, len], 1.0, &mut rng);
        fd_layer(&mut l, &x, &mut rng)
    });
}

/// Distinct values at least 0.05 apart so no window has a near-tie.
fn spaced(shape: &[usize], rng: &mut SeededRng) -> Tensor {
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.05 - n as f64 * 0.025).collect();
    rng.shuffle(&mut v);
    Tensor::new(shape.to_vec(), v).unwrap()
}

#[test]
fn maxpool() {
    let shapes = [(2, 2, 6, 2), (1, 3, 9, 3), (2, 1, 7, 2)];
    sweep(1e-5, "maxpool", |seed, s| {
        let (b, c, len, p) = shapes[s];
        let mut rng = SeededRng::new(seed);
        let mut l = MaxPool1d::new("p", p, p).unwrap();
        let x = spaced(&[b, c, len], &mut rng);
        fd_layer(&mut l, &x, &mut rng)
    });
}

#[test]
fn relu() {
    let shapes: [&[usize]; 3] = [&[2, 5], &[1, 3, 4], &[3, 2, 2]];
    sweep(1e-5, "relu", |seed, s| {
        let mut rng = SeededRng::new(seed);
        let x = Tensor::randn(shapes[s], 1.0, &mut rng).map(|v| if v.abs() < 1e-3 { 0.5 } else { v });
        fd_layer(&mut Relu::new("r"), &x, &mut rng)
    });
}

#[test]
fn dropout_eval() {
    let shapes: [&[usize]; 3] = [&[2, 5], &[1, 3, 4], &[3, 2, 2]];
    sweep(1e-5, "dropout", |seed, s| {
        let mut rng = SeededRng::new(seed);
        let mut l = Dropout::new("drop", 0.3, rng.derive(1)).unwrap();
        let x = Tensor::randn(shapes[s], 1.0, &mut rng);
        let y = l.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.data(), x.data());
        fd_layer(&mut l, &x, &mut rng)
    });
}

#[test]
fn softmax_ce() {
    let shapes = [(2, 3), (4, 5), (1, 2)];
    sweep(1e-6, "softmax-ce", |seed, s| {
        let (b, c) = shapes[s];
        let mut rng = SeededRng::new(seed);
        let logits = Tensor::randn(&[b, c], 2.0, &mut rng);
        let labels: Vec<usize> = (0..b).map(|_| rng.below(c)).collect();
        let (_, _, g) = softmax_cross_entropy(&logits, &labels).unwrap();
        let mut worst = 0.0f64;
        for i in 0..logits.len() {
            let v = logits.data()[i];
            let up = softmax_cross_entropy(&with_entry(&logits, i, v + EPS), &labels).unwrap().0;
            let dn = softmax_cross_entropy(&with_entry(&logits, i, v - EPS), &labels).unwrap().0;
            worst = worst.max(rel(g.data()[i], (up - dn) / (2.0 * EPS)));
        }
        worst
    });
}

const SEQ: [(usize, usize, usize, usize); 3] = [(1, 4, 2, 3), (2, 5, 3, 2), (2, 3, 4, 4)];

fn qrnn_case(pooling: Pooling) {
    sweep(1e-5, "qrnn", |seed, s| {
        let (b, t, i, h) = SEQ[s];
        let mut rng = SeededRng::new(seed);
        let mut l = Qrnn::new("q", i, h, 2, pooling, &mut rng).unwrap();
        let x = Tensor::randn(&[b, t, i], 1.0, &mut rng);
        fd_layer(&mut l, &x, &mut rng)
    });
}

#[test]
fn qrnn_fo() {
    qrnn_case(Pooling::Fo);
}

#[test]
fn qrnn_f() {
    qrnn_case(Pooling::F);
}

#[test]
fn qrnn_ifo() {
    qrnn_case(Pooling::Ifo);
}

#[test]
fn qrnn_initial_state() {
    sweep(1e-5, "qrnn c0", |seed, s| {
        let (b, t, i, h) = SEQ[s];
        let mut rng = SeededRng::new(seed);
        let mut l = Qrnn::new("q", i, h, 2, Pooling::Fo, &mut rng).unwrap();
        let x = Tensor::randn(&[b, t, i], 1.0, &mut rng);
        let c0 = Tensor::randn(&[b, h], 1.0, &mut rng);
        let (y, _) = l.forward_with_state(&x, Some(&c0)).unwrap();
        let r = Tensor::randn(y.shape(), 1.0, &mut rng);
        let g = l.backward_full(&r).unwrap().initial_state;
        let mut loss = |c: &Tensor| {
            let (y, _) = l.forward_with_state(&x, Some(c)).unwrap();
            y.dot(&r).unwrap()
        };
        let mut worst = 0.0f64;
        for k in 0..c0.len() {
            let v = c0.data()[k];
            let n = (loss(&with_entry(&c0, k, v + EPS)) - loss(&with_entry(&c0, k, v - EPS))) / (2.0 * EPS);
            worst = worst.max(rel(g.data()[k], n));
        }
        worst
    });
}

#[test]
fn lstm() {
    sweep(1e-5, "lstm", |seed, s| {
        let (b, t, i, h) = SEQ[s];
        let mut rng = SeededRng::new(seed);
        let mut l = Lstm::new("l", i, h, &mut rng).unwrap();
        let x = Tensor::randn(&[b, t, i], 1.0, &mut rng);
        fd_layer(&mut l, &x, &mut rng)
    });
}

#[test]
fn gru() {
    sweep(1e-5, "gru", |seed, s| {
        let (b, t, i, h) = SEQ[s];
        let mut rng = SeededRng::new(seed);
        let mut l = Gru::new("g", i, h, &mut rng).unwrap();
        let x = Tensor::randn(&[b, t, i], 1.0, &mut rng);
        fd_layer(&mut l, &x, &mut rng)
    });
}

#[test]
fn hybrid_conv1_weights() {
    let shapes = [(2, 8, 3), (3, 8, 3), (4, 8, 3)];
    sweep(1e-4, "hybrid", |seed, s| {
        let (b, f, c) = shapes[s];
        let mut cfg = ModelConfig::new(f, c);
        cfg.seed = seed;
        let mut model = build_hybrid(&cfg).unwrap();
        let mut rng = SeededRng::new(seed + 100);
        let x = Tensor::randn(&[b, f], 1.0, &mut rng);
        let labels: Vec<usize> = (0..b).map(|_| rng.below(c)).collect();
        let logits = model.forward(&x).unwrap();
        let (_, _, g) = softmax_cross_entropy(&logits, &labels).unwrap();
        model.backward(&g).unwrap();
        let p = model.params().into_iter().find(|p| p.name == "conv1.weight").unwrap().clone();
        let loss = |m: &mut qrnn_cti::model::Model| {
            let logits = m.forward(&x).unwrap();
            softmax_cross_entropy(&logits, &labels).unwrap().0
        };
        let mut worst = 0.0f64;
        for i in 0..p.value.len() {
            let v = p.value.data()[i];
            model.set_param(&p.name, with_entry(&p.value, i, v + EPS)).unwrap();
            let up = loss(&mut model);
            model.set_param(&p.name, with_entry(&p.value, i, v - EPS)).unwrap();
            let dn = loss(&mut model);
            model.set_param(&p.name, p.value.clone()).unwrap();
            worst = worst.max(rel(p.grad.data()[i], (up - dn) / (2.0 * EPS)));
        }
        worst
    });
}

#[test]
fn library_suite_passes_within_budget() {
    let t0 = std::time::Instant::now();
    let rows = qrnn_cti::train::gradcheck::standard_suite(&[1, 2, 3, 4, 5]).unwrap();
    for r in &rows {
        assert!(r.passed, "{} {:e} >= {:e}", r.check, r.max_rel_error, r.tolerance);
    }
    assert!(t0.elapsed().as_secs() < 120);
}
