use super::{not_run, Layer, Mode, Param};
use crate::error::{shape_err, Result};
use crate::rng::SeededRng;
use crate::tensor::{gemm, MatRef, Tensor};

/// Fully connected layer, `y = x · W + bias` with `W` of shape `(in, out)`.
#[derive(Debug, Clone)]
pub struct Dense {
    name: String,
    weight: Param,
    bias: Param,
    input: Option<Tensor>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new(name: &str, inputs: usize, outputs: usize, rng: &mut SeededRng) -> Result<Self> {
        let weight = Tensor::glorot_uniform(&[inputs, outputs], inputs, outputs, rng)?;
        Self::from_weights(name, weight, Tensor::zeros(&[outputs]))
    }

    pub fn from_weights(name: &str, weight: Tensor, bias: Tensor) -> Result<Self> {
        let &[_, outputs] = weight.shape() else {
            return Err(shape_err(format!("{name}: dense weight must be 2-D")));
        };
        if bias.shape() != [outputs] {
            return Err(shape_err(format!(
                "{name}: bias shape {:?} does not match {outputs} outputs",
                bias.shape()
            )));
        }
        Ok(Self {
            name: name.to_owned(),
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            input: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward_dense(&mut self, x: &Tensor) -> Result<Tensor> {
        let shape = self.output_shape(x.shape())?;
        let (batch, outputs) = (shape[0], shape[1]);
        let mut out = vec![0.0; batch * outputs];
        for row in out.chunks_mut(outputs) {
            row.copy_from_slice(self.bias.value.data());
        }
        gemm(
            MatRef::new(x.data(), batch, self.inputs()),
            MatRef::new(self.weight.value.data(), self.inputs(), outputs),
            &mut out,
            1.0,
        );
        self.input = Some(x.clone());
        Tensor::new(shape, out)
    }

    pub fn backward_dense(&self, grad_out: &Tensor) -> Result<DenseGrads> {
        let x = self.input.as_ref().ok_or_else(|| not_run(&self.name))?;
        let (batch, inputs, outputs) = (x.shape()[0], self.inputs(), self.outputs());
        if grad_out.shape() != [batch, outputs] {
            return Err(shape_err(format!(
                "{}: grad shape {:?}, expected {:?}",
                self.name,
                grad_out.shape(),
                [batch, outputs]
            )));
        }
        let g = MatRef::new(grad_out.data(), batch, outputs);
        let mut grad_in = vec![0.0; batch * inputs];
        gemm(
            g,
            MatRef::new(self.weight.value.data(), inputs, outputs).t(),
            &mut grad_in,
            0.0,
        );
        let mut grad_w = vec![0.0; inputs * outputs];
        gemm(MatRef::new(x.data(), batch, inputs).t(), g, &mut grad_w, 0.0);
        let mut grad_b = vec![0.0; outputs];
        for row in grad_out.data().chunks(outputs) {
            for (acc, v) in grad_b.iter_mut().zip(row) {
                *acc += v;
            }
        }
        Ok(DenseGrads {
            input: Tensor::new(vec![batch, inputs], grad_in)?,
            weight: Tensor::new(vec![inputs, outputs], grad_w)?,
            bias: Tensor::new(vec![outputs], grad_b)?,
        })
    }
}

impl Layer for Dense {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        self.forward_dense(x)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let grads = self.backward_dense(grad_out)?;
        self.weight.set_grad(grads.weight);
        self.bias.set_grad(grads.bias);
        Ok(grads.input)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            &[batch, width] if width == self.inputs() => Ok(vec![batch, self.outputs()]),
            _ => Err(shape_err(format!(
                "{}: expected (batch, {}), got {input:?}",
                self.name,
                self.inputs()
            ))),
        }
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
