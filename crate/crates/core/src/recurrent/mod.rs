//! Sequence layers over `(batch, time, features)` activations.

mod gru;
mod lstm;
mod qrnn;

pub use gru::Gru;
pub use lstm::Lstm;
pub use qrnn::{fo_pool, Pooling, Qrnn, QrnnGates, QrnnGrads};

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::layers::{expect_rank, not_run, Layer, Mode};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrentKind {
    #[default]
    Qrnn,
    Lstm,
    Gru,
}

/// Keeps only the final timestep: `(batch, time, h) -> (batch, h)`.
#[derive(Debug, Clone)]
pub struct LastStep {
    name: String,
    input_shape: Option<Vec<usize>>,
}

impl LastStep {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            input_shape: None,
        }
    }
}

impl Layer for LastStep {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let out_shape = self.output_shape(x.shape())?;
        let &[batch, steps, h] = x.shape() else { unreachable!() };
        let mut out = Vec::with_capacity(batch * h);
        for n in 0..batch {
            out.extend_from_slice(&x.data()[(n * steps + steps - 1) * h..][..h]);
        }
        self.input_shape = Some(x.shape().to_vec());
        Tensor::new(out_shape, out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let shape = self.input_shape.as_ref().ok_or_else(|| not_run(&self.name))?;
        let &[batch, steps, h] = shape.as_slice() else { unreachable!() };
        if grad_out.shape() != [batch, h] {
            return Err(shape_err(format!("{}: grad shape mismatch", self.name)));
        }
        let mut grad = Tensor::zeros(shape);
        let dst = grad.data_mut();
        for n in 0..batch {
            dst[(n * steps + steps - 1) * h..][..h].copy_from_slice(&grad_out.data()[n * h..][..h]);
        }
        Ok(grad)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let &[batch, _, h] = expect_rank(input, 3, &self.name)? else {
            unreachable!()
        };
        Ok(vec![batch, h])
    }
}
