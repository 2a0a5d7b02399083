use super::{not_run, Layer, Mode};
use crate::error::{shape_err, Error, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// Inverted dropout: in training each unit is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`. Evaluation is the
/// identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    name: String,
    rate: f64,
    rng: SeededRng,
    // None when the last forward was the identity
    mask: Option<Vec<f64>>,
    ran: bool,
}

impl Dropout {
    pub fn new(name: &str, rate: f64, rng: SeededRng) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "{name}: dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Self {
            name: name.to_owned(),
            rate,
            rng,
            mask: None,
            ran: false,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl Layer for Dropout {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        self.ran = true;
        if mode == Mode::Eval || self.rate == 0.0 {
            self.mask = None;
            return Ok(x.clone());
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if self.rng.bernoulli(keep) { scale } else { 0.0 })
            .collect();
        let out = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        self.mask = Some(mask);
        Tensor::new(x.shape().to_vec(), out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        if !self.ran {
            return Err(not_run(&self.name));
        }
        match &self.mask {
            None => Ok(grad_out.clone()),
            Some(mask) if mask.len() == grad_out.len() => Tensor::new(
                grad_out.shape().to_vec(),
                grad_out.data().iter().zip(mask).map(|(g, m)| g * m).collect(),
            ),
            Some(_) => Err(shape_err(format!("{}: grad shape mismatch", self.name))),
        }
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }
}
