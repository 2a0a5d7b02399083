//! Wall-clock comparisons. Kept in one sequential test so the measurements
//! do not compete for the CPU.

use std::time::Instant;

use qrnn_cti::data::{generate_synthetic, stratified_split, SyntheticSpec};
use qrnn_cti::layers::{Layer, Mode};
use qrnn_cti::model::ModelConfig;
use qrnn_cti::recurrent::{Lstm, Pooling, Qrnn};
use qrnn_cti::train::{benchmark, median, BenchConfig, TrainConfig};
use qrnn_cti::{SeededRng, Tensor};

fn time_layer(layer: &mut dyn Layer, x: &Tensor, g: &Tensor) -> f64 {
    let mut runs = Vec::new();
    for i in 0..6 {
        let t0 = Instant::now();
        layer.forward(x, Mode::Train).unwrap();
        layer.backward(g).unwrap();
        if i > 0 {
            runs.push(t0.elapsed().as_secs_f64());
        }
    }
    median(&runs)
}

fn qrnn_layer_beats_lstm_layer() {
    let (b, t, inp, h) = (16, 64, 64, 128);
    let mut rng = SeededRng::new(1);
    let x = Tensor::randn(&[b, t, inp], 1.0, &mut rng);
    let g = Tensor::randn(&[b, t, h], 1.0, &mut rng);
    let mut q = Qrnn::new("q", inp, h, 2, Pooling::Fo, &mut rng).unwrap();
    let mut l = Lstm::new("l", inp, h, &mut rng).unwrap();
    let tq = time_layer(&mut q, &x, &g);
    let tl = time_layer(&mut l, &x, &g);
    println!("layer fwd+bwd median: qrnn {tq:.4}s lstm {tl:.4}s");
    assert!(tq < tl, "qrnn {tq} not faster than lstm {tl}");
}

fn self_comparison_is_within_noise() {
    let spec = SyntheticSpec::separated(32, &[200; 3], 8.0, 5);
    let ds = generate_synthetic(&spec).unwrap();
    let (train, test) = stratified_split(&ds, 0.35, 5).unwrap();
    let arm = ModelConfig::new(32, 3);
    let cfg = TrainConfig {
        batch_size: 64,
        ..Default::default()
    };
    let bench = BenchConfig {
        warmup_epochs: 1,
        timed_epochs: 5,
        ..Default::default()
    };
    let r = benchmark(&[arm.clone(), arm], &cfg, &bench, &train, &test).unwrap();
    println!("self-comparison ratio {:.3}", r.ratio);
    assert!((0.8..=1.25).contains(&r.ratio), "ratio {}", r.ratio);
}

#[test]
fn timing() {
    qrnn_layer_beats_lstm_layer();
    self_comparison_is_within_noise();
}
