use super::{not_run, Layer, Mode};
use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// `max(0, x)`; the subgradient at exactly zero is taken as zero.
#[derive(Debug, Clone)]
pub struct Relu {
    name: String,
    input: Option<Tensor>,
}

impl Relu {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            input: None,
        }
    }
}

impl Layer for Relu {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        self.input = Some(x.clone());
        Ok(x.map(|v| v.max(0.0)))
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or_else(|| not_run(&self.name))?;
        x.zip_map(grad_out, |v, g| if v > 0.0 { g } else { 0.0 })
            .map_err(|_| shape_err(format!("{}: grad shape mismatch", self.name)))
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_negatives() {
        let mut relu = Relu::new("r");
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu.forward(&x, Mode::Eval).unwrap().data(), &[0.0, 0.0, 2.0]);
        let g = relu.backward(&Tensor::full(&[3], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn dead_region() {
        let mut relu = Relu::new("r");
        let x = Tensor::full(&[2, 3], -0.5);
        assert_eq!(relu.forward(&x, Mode::Train).unwrap(), Tensor::zeros(&[2, 3]));
        assert_eq!(relu.backward(&Tensor::full(&[2, 3], 3.0)).unwrap(), Tensor::zeros(&[2, 3]));
    }
}
