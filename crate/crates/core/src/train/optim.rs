//! Adam and plain SGD.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::Param;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone)]
struct Moments {
    name: String,
    shape: Vec<usize>,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    state: Vec<Moments>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            state: Vec::new(),
        }
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(OptimizerKind::Adam, lr)
    }

    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerKind::Sgd, lr)
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64, eps: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self.eps = eps;
        self
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Apply one update from the gradients stored in `params`.
    ///
    /// The registry (names and shapes, in order) must be the same on every
    /// call.
    pub fn step(&mut self, mut params: Vec<&mut Param>) -> Result<()> {
        if self.state.is_empty() && self.t == 0 {
            self.state = params
                .iter()
                .map(|p| Moments {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    m: vec![0.0; p.value.len()],
                    v: vec![0.0; p.value.len()],
                })
                .collect();
        }
        if params.len() != self.state.len()
            || params
                .iter()
                .zip(&self.state)
                .any(|(p, s)| p.name != s.name || p.value.shape() != s.shape.as_slice())
        {
            return Err(Error::State(
                "optimizer registry does not match the model parameters".into(),
            ));
        }
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut() {
                    let lr = self.lr;
                    let grad = p.grad.data().to_vec();
                    for (w, g) in p.value.data_mut().iter_mut().zip(grad) {
                        *w -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (self.beta1, self.beta2);
                let c1 = 1.0 - b1.powi(self.t as i32);
                let c2 = 1.0 - b2.powi(self.t as i32);
                for (p, s) in params.iter_mut().zip(&mut self.state) {
                    let grad = p.grad.data().to_vec();
                    let w = p.value.data_mut();
                    for i in 0..w.len() {
                        let g = grad[i];
                        s.m[i] = b1 * s.m[i] + (1.0 - b1) * g;
                        s.v[i] = b2 * s.v[i] + (1.0 - b2) * g * g;
                        let m_hat = s.m[i] / c1;
                        let v_hat = s.v[i] / c2;
                        w[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
        Ok(())
    }
}
