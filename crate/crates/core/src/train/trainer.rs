//! Mini-batch training loop and test-set evaluation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{metrics_from_confusion, ConfusionMatrix, MetricsReport};
use super::optim::{Optimizer, OptimizerKind};
use super::roc::{roc_auc, RocCurve};
use crate::data::Dataset;
use crate::error::{shape_err, Error, Result};
use crate::layers::{softmax_cross_entropy, Mode};
use crate::model::{argmax_rows, Model};
use crate::rng::SeededRng;

/// RNG stream used for epoch shuffles.
const SHUFFLE_STREAM: u64 = 0x5F;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 256,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 42,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1 and beta2 must be in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> Optimizer {
        Optimizer::new(self.optimizer, self.learning_rate).with_betas(
            self.beta1,
            self.beta2,
            self.epsilon,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's samples.
    pub loss: f64,
    /// Training accuracy of the train-mode forward passes.
    pub accuracy: f64,
    pub steps: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: String,
    pub config: TrainConfig,
    pub samples: usize,
    pub epochs: Vec<EpochStats>,
    pub optimizer_steps: u64,
    pub seconds: f64,
}

impl TrainReport {
    pub fn mean_epoch_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum::<f64>() / self.epochs.len() as f64
    }
}

pub fn train(model: &mut Model, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with(model, ds, cfg, |_| {})
}

/// Train with a callback after every epoch. The model is left in eval mode.
pub fn train_with(
    model: &mut Model,
    ds: &Dataset,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    cfg.validate()?;
    let mc = model.config();
    if ds.n_features() != mc.n_features || ds.n_classes() != mc.n_classes {
        return Err(shape_err(format!(
            "model expects {} features / {} classes, dataset has {} / {}",
            mc.n_features,
            mc.n_classes,
            ds.n_features(),
            ds.n_classes()
        )));
    }
    let result = run_epochs(model, ds, cfg, on_epoch);
    model.set_mode(Mode::Eval);
    result
}

fn run_epochs(
    model: &mut Model,
    ds: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    let started = Instant::now();
    let mut optimizer = cfg.optimizer();
    let mut rng = SeededRng::new(cfg.seed).derive(SHUFFLE_STREAM);
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    model.set_mode(Mode::Train);
    for epoch in 1..=cfg.epochs {
        let t0 = Instant::now();
        if cfg.shuffle {
            rng.shuffle(&mut order);
        }
        let steps_before = optimizer.steps();
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let x = ds.features().select_rows(batch)?;
            let y: Vec<usize> = batch.iter().map(|&i| ds.labels()[i]).collect();
            let logits = model.forward(&x)?;
            let (loss, _, grad) = softmax_cross_entropy(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: format!("loss became {loss}"),
                });
            }
            model.backward(&grad)?;
            optimizer.step(model.params_mut())?;
            loss_sum += loss * batch.len() as f64;
            correct += argmax_rows(&logits)
                .iter()
                .zip(&y)
                .filter(|(p, t)| p == t)
                .count();
        }
        if model.params().iter().any(|p| !p.value.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                message: "parameters became non-finite".into(),
            });
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
            steps: optimizer.steps() - steps_before,
            seconds: t0.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        epochs.push(stats);
    }
    Ok(TrainReport {
        model: model.kind().to_string(),
        config: cfg.clone(),
        samples: n,
        epochs,
        optimizer_steps: optimizer.steps(),
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub roc: Vec<RocCurve>,
    /// Classes without a ROC curve because the test set lacks positives or
    /// negatives for them.
    pub roc_undefined: Vec<String>,
    /// Wall time of the full prediction pass over the test set.
    pub classification_seconds: f64,
}

/// One eval-mode pass over `ds`: confusion matrix, metrics and per-class ROC.
pub fn evaluate(model: &mut Model, ds: &Dataset, batch_size: usize) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    model.check_compatible(ds.n_features(), ds.n_classes())?;
    model.set_mode(Mode::Eval);
    let t0 = Instant::now();
    let probs = model.predict_proba(ds.features(), batch_size)?;
    let predicted = argmax_rows(&probs);
    let classification_seconds = t0.elapsed().as_secs_f64();

    let confusion =
        ConfusionMatrix::from_predictions(ds.labels(), &predicted, ds.class_names().to_vec())?;
    let metrics = metrics_from_confusion(&confusion)?;
    let mut roc = Vec::new();
    let mut roc_undefined = Vec::new();
    for (c, name) in ds.class_names().iter().enumerate() {
        match roc_auc(&probs, ds.labels(), c, name) {
            Ok(curve) => roc.push(curve),
            Err(Error::UndefinedRoc(_)) => roc_undefined.push(name.clone()),
            Err(e) => return Err(e),
        }
    }
    Ok(Evaluation {
        confusion,
        metrics,
        roc,
        roc_undefined,
        classification_seconds,
    })
}
