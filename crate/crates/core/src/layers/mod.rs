//! Feed-forward building blocks with explicit forward/backward passes.
//!
//! Every layer caches what its backward pass needs during `forward`.
//! `backward` takes the gradient of some scalar loss with respect to the
//! layer output, stores parameter gradients in the layer's [`Param`]s
//! (overwriting, not accumulating), and returns the gradient with respect to
//! the layer input. Parameters are only changed by an optimizer.

mod conv;
mod dense;
mod dropout;
mod loss;
mod pool;
mod relu;
mod reshape;

pub use conv::{Conv1d, Conv1dGrads};
pub use dense::{Dense, DenseGrads};
pub use dropout::Dropout;
pub use loss::{softmax, softmax_cross_entropy, SoftmaxCrossEntropy};
pub use pool::MaxPool1d;
pub use relu::Relu;
pub use reshape::{Flatten, Reshape, SwapAxes};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Train,
    #[default]
    Eval,
}

/// A named trainable tensor together with its most recent gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub(crate) fn set_grad(&mut self, grad: Tensor) {
        debug_assert_eq!(grad.shape(), self.value.shape());
        self.grad = grad;
    }
}

pub trait Layer: Send {
    /// Instance name; parameter names are prefixed with it.
    fn name(&self) -> &str;

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor>;

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor>;

    /// Output shape for a given input shape, without computing anything.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
}

pub(crate) fn not_run(layer: &str) -> Error {
    Error::State(format!("{layer}: backward called before forward"))
}

pub(crate) fn expect_rank<'a>(shape: &'a [usize], rank: usize, who: &str) -> Result<&'a [usize]> {
    if shape.len() != rank {
        return Err(Error::Shape(format!(
            "{who} expects a {rank}-D input, got {shape:?}"
        )));
    }
    Ok(shape)
}
