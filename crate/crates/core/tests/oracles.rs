//! Forward passes and metrics against naive reference implementations.

use proptest::prelude::*;
use qrnn_cti::layers::{Conv1d, Dense, Layer, Mode};
use qrnn_cti::recurrent::{fo_pool, Lstm, Pooling, Qrnn};
use qrnn_cti::train::{metrics_from_confusion, ConfusionMatrix};
use qrnn_cti::{SeededRng, Tensor};

mod common;
use common::{brute, naive_conv, scalar_fo_pool};

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn conv1d_matches_triple_loop() {
    let mut rng = SeededRng::new(3);
    for (n, ci, co, k, len) in [(2, 3, 4, 3, 9), (1, 1, 5, 1, 4), (3, 2, 2, 5, 11), (2, 4, 3, 5, 3)] {
        let w = Tensor::randn(&[co, ci, k], 1.0, &mut rng);
        let b = Tensor::randn(&[co], 1.0, &mut rng);
        let x = Tensor::randn(&[n, ci, len], 1.0, &mut rng);
        let mut conv = Conv1d::from_weights("c", w.clone(), b.clone()).unwrap();
        let y = conv.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), [n, co, len]);
        for (a, e) in y.data().iter().zip(naive_conv(&x, &w, &b)) {
            assert!((a - e).abs() <= 1e-12, "{a} vs {e}");
        }
    }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn fo_pool_matches_scalar_loop_bitwise() {
    let mut rng = SeededRng::new(9);
    for (b, t, h) in [(1, 1, 1), (2, 7, 3), (3, 16, 5)] {
        let z = Tensor::rand_uniform(&[b, t, h], -1.0, 1.0, &mut rng);
        let f = Tensor::rand_uniform(&[b, t, h], 0.0, 1.0, &mut rng);
        let o = Tensor::rand_uniform(&[b, t, h], 0.0, 1.0, &mut rng);
        let c0 = Tensor::randn(&[b, h], 1.0, &mut rng);
        let (hs, last) = fo_pool(&z, &f, &o, Some(&c0)).unwrap();
        let (eh, el) = scalar_fo_pool(&z, &f, &o, c0.data());
        assert_eq!(bits(hs.data()), bits(&eh));
        assert_eq!(bits(last.data()), bits(&el));
    }
}

#[test]
fn fo_pool_hand_example() {
    let t = |v: &[f64]| Tensor::new(vec![1, 2, 1], v.to_vec()).unwrap();
    let (h, c) = fo_pool(&t(&[0.5, -0.5]), &t(&[0.5, 0.5]), &t(&[1.0, 1.0]), None).unwrap();
    assert_eq!(h.data(), [0.25, -0.125]);
    assert_eq!(c.data(), [-0.125]);
}

#[test]
fn qrnn_layer_is_gates_then_fo_pool() {
    let mut rng = SeededRng::new(21);
    let mut q = Qrnn::new("q", 3, 4, 2, Pooling::Fo, &mut rng).unwrap();
    let x = Tensor::randn(&[2, 6, 3], 1.0, &mut rng);
    let g = q.gates(&x).unwrap();
    let (h, _) = fo_pool(&g.z, &g.f, g.o.as_ref().unwrap(), None).unwrap();
    let y = q.forward(&x, Mode::Eval).unwrap();
    assert_eq!(bits(y.data()), bits(h.data()));
}

#[test]
fn qrnn_gates_match_causal_conv_loop() {
    let mut rng = SeededRng::new(5);
    let (b, t, inp, hid, k) = (2, 5, 3, 4, 3);
    let ws: Vec<Tensor> = (0..3).map(|_| Tensor::randn(&[hid, inp, k], 0.7, &mut rng)).collect();
    let bs: Vec<Tensor> = (0..3).map(|_| Tensor::randn(&[hid], 0.3, &mut rng)).collect();
    let mut q = Qrnn::new("q", inp, hid, k, Pooling::Fo, &mut rng).unwrap();
    q.set_params(ws.clone(), bs.clone()).unwrap();
    let x = Tensor::randn(&[b, t, inp], 1.0, &mut rng);
    let g = q.gates(&x).unwrap();
    let acts: [(&Tensor, fn(f64) -> f64); 3] =
        [(&g.z, f64::tanh), (&g.f, sig), (g.o.as_ref().unwrap(), sig)];
    for (gate, (got, act)) in acts.into_iter().enumerate() {
        for n in 0..b {
            for s in 0..t {
                for u in 0..hid {
                    let mut pre = bs[gate].data()[u];
                    for i in 0..inp {
                        for j in 0..k {
                            if let Some(src) = (s + j).checked_sub(k - 1) {
                                pre += ws[gate].get(&[u, i, j]) * x.get(&[n, src, i]);
                            }
                        }
                    }
                    assert!((got.get(&[n, s, u]) - act(pre)).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn qrnn_window_one_is_per_step_dense() {
    let mut rng = SeededRng::new(8);
    let (inp, hid) = (3, 2);
    let ws: Vec<Tensor> = (0..3).map(|_| Tensor::randn(&[hid, inp, 1], 1.0, &mut rng)).collect();
    let bs: Vec<Tensor> = (0..3).map(|_| Tensor::randn(&[hid], 1.0, &mut rng)).collect();
    let mut q = Qrnn::new("q", inp, hid, 1, Pooling::Fo, &mut rng).unwrap();
    q.set_params(ws.clone(), bs.clone()).unwrap();
    let x = Tensor::randn(&[1, 4, inp], 1.0, &mut rng);
    let g = q.gates(&x).unwrap();
    // Dense weight is (in, out); the gate weight is (out, in, 1).
    let mut dense = Dense::from_weights(
        "d",
        ws[0].reshape(&[1, hid, inp]).unwrap().swap_last_axes().unwrap().reshape(&[inp, hid]).unwrap(),
        bs[0].clone(),
    )
    .unwrap();
    for s in 0..4 {
        let xt = x.reshape(&[4, inp]).unwrap().slice_rows(s, 1).unwrap();
        let pre = dense.forward(&xt, Mode::Eval).unwrap();
        for u in 0..hid {
            assert!((g.z.get(&[0, s, u]) - pre.data()[u].tanh()).abs() <= 1e-12);
        }
    }
}

#[test]
fn qrnn_is_causal() {
    let mut rng = SeededRng::new(4);
    let mut q = Qrnn::new("q", 2, 3, 2, Pooling::Fo, &mut rng).unwrap();
    let x = Tensor::randn(&[2, 8, 2], 1.0, &mut rng);
    let full = q.forward(&x, Mode::Eval).unwrap();
    for t in 1..8 {
        let mut prefix = Vec::new();
        for n in 0..2 {
            prefix.extend_from_slice(&x.data()[n * 16..n * 16 + t * 2]);
        }
        let y = q.forward(&Tensor::new(vec![2, t, 2], prefix).unwrap(), Mode::Eval).unwrap();
        for n in 0..2 {
            assert_eq!(
                bits(&y.data()[n * t * 3..(n + 1) * t * 3]),
                bits(&full.data()[n * 24..n * 24 + t * 3])
            );
        }
    }
}

#[test]
fn lstm_single_step_matches_cell() {
    let mut rng = SeededRng::new(12);
    let (inp, h) = (3, 2);
    let wi = Tensor::randn(&[inp, 4 * h], 1.0, &mut rng);
    let wh = Tensor::randn(&[h, 4 * h], 1.0, &mut rng);
    let b = Tensor::randn(&[4 * h], 1.0, &mut rng);
    let mut l = Lstm::new("l", inp, h, &mut rng).unwrap();
    l.set_params(wi.clone(), wh, b.clone()).unwrap();
    let x = Tensor::randn(&[1, 1, inp], 1.0, &mut rng);
    let y = l.forward(&x, Mode::Eval).unwrap();
    for u in 0..h {
        let pre = |gate: usize| {
            b.data()[gate * h + u] + (0..inp).map(|i| x.data()[i] * wi.get(&[i, gate * h + u])).sum::<f64>()
        };
        let c = sig(pre(0)) * pre(2).tanh();
        let expect = sig(pre(3)) * c.tanh();
        assert!((y.data()[u] - expect).abs() <= 1e-12);
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

proptest! {
    #[test]
    fn metrics_match_brute_force(
        classes in 2usize..7,
        pairs in prop::collection::vec((0usize..64, 0usize..64), 1..300),
    ) {
        let truth: Vec<usize> = pairs.iter().map(|p| p.0 % classes).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1 % classes).collect();
        let names = (0..classes).map(|c| format!("c{c}")).collect();
        let cm = ConfusionMatrix::from_predictions(&truth, &pred, names).unwrap();
        let m = metrics_from_confusion(&cm).unwrap();
        let b = brute(&truth, &pred, classes);
        let row = |a: &qrnn_cti::train::AveragedMetrics| [a.accuracy, a.tpr, a.fpr, a.precision, a.recall, a.fscore];
        for (got, exp) in m.per_class.iter().zip(&b.per_class) {
            let g = [got.accuracy, got.tpr, got.fpr, got.precision, got.recall, got.fscore];
            for k in 0..6 {
                prop_assert!(close(g[k], exp[k]), "{} field {k}: {} vs {}", got.class, g[k], exp[k]);
            }
            prop_assert_eq!(got.tpr.to_bits(), got.recall.to_bits());
        }
        for k in 0..6 {
            prop_assert!(close(row(&m.macro_avg)[k], b.macro_avg[k]));
            prop_assert!(close(row(&m.micro_avg)[k], b.micro_avg[k]));
        }
        let acc = cm.trace() as f64 / cm.total() as f64;
        prop_assert_eq!(m.micro_avg.accuracy, acc);
        prop_assert!(close(m.micro_avg.precision, acc));
        prop_assert!(close(m.micro_avg.recall, acc));
    }
}

#[test]
fn binary_hand_example() {
    // TP=8, FN=2 for class 0; FP=1, TN=9.
    let cm = ConfusionMatrix {
        classes: vec!["a".into(), "b".into()],
        counts: vec![vec![8, 2], vec![1, 9]],
    };
    let m = metrics_from_confusion(&cm).unwrap();
    let a = &m.per_class[0];
    assert!(close(a.precision, 8.0 / 9.0));
    assert!(close(a.recall, 0.8));
    assert!(close(a.accuracy, 0.85));
    assert!(close(a.fpr, 0.1));
    assert!((a.fscore - 0.8421).abs() < 5e-5);
    let exact = (16.0 / 19.0 + 18.0 / 21.0) / 2.0;
    assert!(close(m.macro_avg.fscore, exact));
}
