//! Parameter-free layout changes between model stages.

use super::{expect_rank, not_run, Layer, Mode};
use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// `(batch, ...) -> (batch, prod(...))`.
#[derive(Debug, Clone)]
pub struct Flatten {
    name: String,
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            input_shape: None,
        }
    }
}

impl Layer for Flatten {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let shape = self.output_shape(x.shape())?;
        self.input_shape = Some(x.shape().to_vec());
        x.reshape(&shape)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let shape = self.input_shape.as_ref().ok_or_else(|| not_run(&self.name))?;
        grad_out.reshape(shape)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input.split_first() {
            Some((&batch, rest)) if !rest.is_empty() => Ok(vec![batch, rest.iter().product()]),
            _ => Err(shape_err(format!("{}: cannot flatten {input:?}", self.name))),
        }
    }
}

/// `(batch, ...) -> (batch, target...)`, keeping the data order.
#[derive(Debug, Clone)]
pub struct Reshape {
    name: String,
    target: Vec<usize>,
    input_shape: Option<Vec<usize>>,
}

impl Reshape {
    pub fn new(name: &str, target: &[usize]) -> Self {
        Self {
            name: name.to_owned(),
            target: target.to_vec(),
            input_shape: None,
        }
    }
}

impl Layer for Reshape {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let shape = self.output_shape(x.shape())?;
        self.input_shape = Some(x.shape().to_vec());
        x.reshape(&shape)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let shape = self.input_shape.as_ref().ok_or_else(|| not_run(&self.name))?;
        grad_out.reshape(shape)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (&batch, rest) = input
            .split_first()
            .ok_or_else(|| shape_err(format!("{}: empty shape", self.name)))?;
        if rest.iter().product::<usize>() != self.target.iter().product::<usize>() {
            return Err(shape_err(format!(
                "{}: cannot reshape {input:?} to (batch, {:?})",
                self.name, self.target
            )));
        }
        Ok(std::iter::once(batch).chain(self.target.iter().copied()).collect())
    }
}

/// Swaps the last two axes of a 3-D activation. Moves between the
/// convolutional `(batch, channels, length)` and recurrent
/// `(batch, time, features)` layouts.
#[derive(Debug, Clone)]
pub struct SwapAxes {
    name: String,
    ran: bool,
}

impl SwapAxes {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            ran: false,
        }
    }
}

impl Layer for SwapAxes {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        self.ran = true;
        x.swap_last_axes()
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        if !self.ran {
            return Err(not_run(&self.name));
        }
        grad_out.swap_last_axes()
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let &[b, x, y] = expect_rank(input, 3, &self.name)? else {
            unreachable!()
        };
        Ok(vec![b, y, x])
    }
}
