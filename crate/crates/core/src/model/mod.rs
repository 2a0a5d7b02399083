//! Model stacks: the hybrid convolution + QRNN classifier and its baselines.
//!
//! A flow record of `F` standardized features enters as `(batch, F)` and is
//! read as a length-`F` sequence with one channel. The hybrid stack is
//!
//! ```text
//! (b, F) -> (b, 1, F) -> conv1 + relu -> maxpool -> (b, T, C)
//!        -> recurrent x qrnn_layers -> dropout -> (b, C', T)
//!        -> conv2 + relu -> maxpool -> flatten -> dense -> logits (b, classes)
//! ```

mod checkpoint;
mod config;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{BaselineKind, ModelConfig};

use crate::error::{shape_err, Error, Result};
use crate::layers::{
    softmax, Conv1d, Dense, Dropout, Flatten, Layer, MaxPool1d, Mode, Param, Relu, Reshape,
    SwapAxes,
};
use crate::recurrent::{Gru, LastStep, Lstm, Qrnn, RecurrentKind};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// RNG stream reserved for dropout masks.
const DROPOUT_STREAM: u64 = 0xD0;

/// Name prefix of recurrent layers in every stack.
pub const RECURRENT_PREFIX: &str = "recurrent";

pub struct Model {
    kind: BaselineKind,
    config: ModelConfig,
    layers: Vec<Box<dyn Layer>>,
    mode: Mode,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("kind", &self.kind)
            .field("config", &self.config)
            .field("layers", &self.layers.iter().map(|l| l.name()).collect::<Vec<_>>())
            .field("mode", &self.mode)
            .finish()
    }
}

fn recurrent_layer(
    kind: RecurrentKind,
    name: &str,
    inputs: usize,
    config: &ModelConfig,
    rng: &mut SeededRng,
) -> Result<Box<dyn Layer>> {
    let hidden = config.hidden();
    Ok(match kind {
        RecurrentKind::Qrnn => Box::new(Qrnn::new(
            name,
            inputs,
            hidden,
            config.qrnn_window,
            config.pooling,
            rng,
        )?),
        RecurrentKind::Lstm => Box::new(Lstm::new(name, inputs, hidden, rng)?),
        RecurrentKind::Gru => Box::new(Gru::new(name, inputs, hidden, rng)?),
    })
}

/// Build the hybrid convolution + recurrent stack.
pub fn build_hybrid(config: &ModelConfig) -> Result<Model> {
    config.validate()?;
    let kind = match config.recurrent_kind {
        RecurrentKind::Qrnn => BaselineKind::HybridQrnn,
        RecurrentKind::Lstm => BaselineKind::HybridLstm,
        RecurrentKind::Gru => {
            return Err(Error::Config(
                "the hybrid stack takes a qrnn or lstm recurrent kind".into(),
            ))
        }
    };
    let mut rng = SeededRng::new(config.seed);
    let dropout_rng = rng.derive(DROPOUT_STREAM);
    let f = config.n_features;
    let p = config.pool_size;
    let len1 = f / p;
    let len2 = len1 / p;
    let hidden = config.hidden();
    let mut layers: Vec<Box<dyn Layer>> = vec![
        Box::new(Reshape::new("reshape", &[1, f])),
        Box::new(Conv1d::new("conv1", 1, config.conv1_filters, config.kernel_size, &mut rng)?),
        Box::new(Relu::new("relu1")),
        Box::new(MaxPool1d::new("pool1", p, p)?),
        Box::new(SwapAxes::new("to_sequence")),
    ];
    let mut inputs = config.conv1_filters;
    for i in 1..=config.qrnn_layers {
        let name = format!("{RECURRENT_PREFIX}{i}");
        layers.push(recurrent_layer(config.recurrent_kind, &name, inputs, config, &mut rng)?);
        inputs = hidden;
    }
    layers.push(Box::new(Dropout::new("dropout", config.dropout_rate, dropout_rng)?));
    layers.push(Box::new(SwapAxes::new("to_channels")));
    layers.push(Box::new(Conv1d::new(
        "conv2",
        hidden,
        config.conv2_filters,
        config.kernel_size,
        &mut rng,
    )?));
    layers.push(Box::new(Relu::new("relu2")));
    layers.push(Box::new(MaxPool1d::new("pool2", p, p)?));
    layers.push(Box::new(Flatten::new("flatten")));
    layers.push(Box::new(Dense::new(
        "dense",
        config.conv2_filters * len2,
        config.n_classes,
        &mut rng,
    )?));
    Ok(Model::from_layers(kind, config.clone(), layers))
}

/// Build one of the comparison stacks.
///
/// * `Mlp`: dense(mlp_hidden) + relu, dropout, dense(classes)
/// * `Cnn`: conv1 + relu, maxpool, flatten, dense(classes)
/// * `Gru` / `Lstm`: one recurrent layer over the `(b, F, 1)` sequence, last
///   hidden state, dense(classes)
/// * `HybridLstm` / `HybridQrnn`: [`build_hybrid`] with the matching
///   recurrent kind
pub fn build_baseline(kind: BaselineKind, config: &ModelConfig) -> Result<Model> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let dropout_rng = rng.derive(DROPOUT_STREAM);
    let f = config.n_features;
    let c = config.n_classes;
    let layers: Vec<Box<dyn Layer>> = match kind {
        BaselineKind::HybridQrnn | BaselineKind::HybridLstm => {
            let recurrent_kind = if kind == BaselineKind::HybridQrnn {
                RecurrentKind::Qrnn
            } else {
                RecurrentKind::Lstm
            };
            return build_hybrid(&ModelConfig {
                recurrent_kind,
                ..config.clone()
            });
        }
        BaselineKind::Mlp => vec![
            Box::new(Dense::new("dense1", f, config.mlp_hidden, &mut rng)?),
            Box::new(Relu::new("relu1")),
            Box::new(Dropout::new("dropout", config.dropout_rate, dropout_rng)?),
            Box::new(Dense::new("dense2", config.mlp_hidden, c, &mut rng)?),
        ],
        BaselineKind::Cnn => vec![
            Box::new(Reshape::new("reshape", &[1, f])),
            Box::new(Conv1d::new("conv1", 1, config.conv1_filters, config.kernel_size, &mut rng)?),
            Box::new(Relu::new("relu1")),
            Box::new(MaxPool1d::new("pool1", config.pool_size, config.pool_size)?),
            Box::new(Flatten::new("flatten")),
            Box::new(Dense::new(
                "dense",
                config.conv1_filters * (f / config.pool_size),
                c,
                &mut rng,
            )?),
        ],
        BaselineKind::Gru | BaselineKind::Lstm => {
            let rk = if kind == BaselineKind::Gru {
                RecurrentKind::Gru
            } else {
                RecurrentKind::Lstm
            };
            vec![
                Box::new(Reshape::new("reshape", &[f, 1])),
                recurrent_layer(rk, &format!("{RECURRENT_PREFIX}1"), 1, config, &mut rng)?,
                Box::new(LastStep::new("last_step")),
                Box::new(Dense::new("dense", config.hidden(), c, &mut rng)?),
            ]
        }
    };
    Ok(Model::from_layers(kind, config.clone(), layers))
}

impl Model {
    fn from_layers(kind: BaselineKind, config: ModelConfig, layers: Vec<Box<dyn Layer>>) -> Self {
        Self {
            kind,
            config,
            layers,
            mode: Mode::Eval,
        }
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn layer_names(&self) -> Vec<&str> {
        self.layers.iter().map(|l| l.name()).collect()
    }

    /// Symbolic shape propagation: `(layer name, output shape)` for each
    /// layer, starting from `("input", (batch, F))`.
    pub fn shape_chain(&self, batch: usize) -> Result<Vec<(String, Vec<usize>)>> {
        let mut shape = vec![batch, self.config.n_features];
        let mut chain = vec![("input".to_owned(), shape.clone())];
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
            chain.push((layer.name().to_owned(), shape.clone()));
        }
        Ok(chain)
    }

    /// Logits `(batch, classes)` for `x` of shape `(batch, F)`.
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        match x.shape() {
            &[_, f] if f == self.config.n_features => {}
            other => {
                return Err(shape_err(format!(
                    "model expects (batch, {}), got {other:?}",
                    self.config.n_features
                )))
            }
        }
        let mut act = x.clone();
        for layer in &mut self.layers {
            act = layer.forward(&act, self.mode)?;
        }
        Ok(act)
    }

    /// Backpropagate `d loss / d logits`, storing parameter gradients.
    /// Returns the gradient with respect to the model input.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Result<Tensor> {
        let mut grad = grad_logits.clone();
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
        }
        Ok(grad)
    }

    /// Class probabilities, computed in chunks of `batch_size` rows.
    pub fn predict_proba(&mut self, x: &Tensor, batch_size: usize) -> Result<Tensor> {
        let rows = x.shape()[0];
        let batch_size = batch_size.max(1);
        let mut probs = Vec::with_capacity(rows * self.config.n_classes);
        let mut start = 0;
        while start < rows {
            let n = batch_size.min(rows - start);
            let logits = self.forward(&x.slice_rows(start, n)?)?;
            probs.extend_from_slice(softmax(&logits)?.data());
            start += n;
        }
        Tensor::new(vec![rows, self.config.n_classes], probs)
    }

    /// Argmax class per row; ties go to the lowest class id.
    pub fn predict(&mut self, x: &Tensor) -> Result<Vec<usize>> {
        let logits = self.forward(x)?;
        Ok(argmax_rows(&logits))
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Overwrite a parameter by name.
    pub fn set_param(&mut self, name: &str, value: Tensor) -> Result<()> {
        let param = self
            .params_mut()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::State(format!("no parameter named {name}")))?;
        if param.value.shape() != value.shape() {
            return Err(shape_err(format!(
                "{name}: shape {:?}, expected {:?}",
                value.shape(),
                param.value.shape()
            )));
        }
        param.value = value;
        Ok(())
    }

    /// Check that this model fits a dataset of the given width and class count.
    pub fn check_compatible(&self, n_features: usize, n_classes: usize) -> Result<()> {
        if self.config.n_features != n_features || self.config.n_classes != n_classes {
            return Err(Error::Format(format!(
                "model built for {} features / {} classes, data has {n_features} / {n_classes}",
                self.config.n_features, self.config.n_classes
            )));
        }
        Ok(())
    }
}

pub fn argmax_rows(scores: &Tensor) -> Vec<usize> {
    let classes = scores.shape()[1];
    scores
        .data()
        .chunks(classes)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
