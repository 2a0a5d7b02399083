//! GRU with the reset gate applied before the recurrent candidate product.
//!
//! Packed gate order along `3 * hidden` is update, reset, candidate:
//!
//! ```text
//! z = sig(x W_z + h U_z + b_z)      r = sig(x W_r + h U_r + b_r)
//! n = tanh(x W_n + (r * h) U_n + b_n)
//! h_t = (1 - z) * h_{t-1} + z * n
//! ```

use crate::error::{shape_err, Error, Result};
use crate::layers::{expect_rank, not_run, Layer, Mode, Param};
use crate::rng::SeededRng;
use crate::tensor::{gemm, gemm_into, sigmoid, MatRef, Tensor};

#[derive(Debug, Clone)]
pub struct Gru {
    name: String,
    inputs: usize,
    hidden: usize,
    w_input: Param,
    w_hidden: Param,
    bias: Param,
    cache: Option<GruCache>,
}

#[derive(Debug, Clone)]
struct GruCache {
    batch: usize,
    steps: usize,
    x: Vec<f64>,
    // Per step (batch, 3H) activations [z r n].
    gates: Vec<Vec<f64>>,
    // h_0 ..= h_T, each (batch, H).
    hiddens: Vec<Vec<f64>>,
}

impl Gru {
    pub fn new(name: &str, inputs: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        if inputs == 0 || hidden == 0 {
            return Err(Error::Config(format!("{name}: inputs and hidden must be >= 1")));
        }
        let w_input = Tensor::glorot_uniform(&[inputs, 3 * hidden], inputs, 3 * hidden, rng)?;
        let w_hidden = Tensor::glorot_uniform(&[hidden, 3 * hidden], hidden, 3 * hidden, rng)?;
        Ok(Self {
            name: name.to_owned(),
            inputs,
            hidden,
            w_input: Param::new(format!("{name}.w_input"), w_input),
            w_hidden: Param::new(format!("{name}.w_hidden"), w_hidden),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[3 * hidden])),
            cache: None,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Replace weights: `w_input (in, 3H)`, `w_hidden (H, 3H)`, `bias (3H)`.
    pub fn set_params(&mut self, w_input: Tensor, w_hidden: Tensor, bias: Tensor) -> Result<()> {
        for (p, v) in [
            (&mut self.w_input, w_input),
            (&mut self.w_hidden, w_hidden),
            (&mut self.bias, bias),
        ] {
            if p.value.shape() != v.shape() {
                return Err(shape_err(format!("{}: bad shape {:?}", p.name, v.shape())));
            }
            p.value = v;
        }
        Ok(())
    }

    /// Per-step `(z, candidate)` activations from the last forward pass,
    /// each `(batch, time, hidden)`.
    pub fn last_gates(&self) -> Option<(Tensor, Tensor)> {
        let cache = self.cache.as_ref()?;
        let (b, t, h) = (cache.batch, cache.steps, self.hidden);
        let mut z = vec![0.0; b * t * h];
        let mut cand = vec![0.0; b * t * h];
        for (step, gates) in cache.gates.iter().enumerate() {
            for n in 0..b {
                let row = &gates[n * 3 * h..][..3 * h];
                z[(n * t + step) * h..][..h].copy_from_slice(&row[..h]);
                cand[(n * t + step) * h..][..h].copy_from_slice(&row[2 * h..]);
            }
        }
        Some((
            Tensor::new(vec![b, t, h], z).ok()?,
            Tensor::new(vec![b, t, h], cand).ok()?,
        ))
    }
}

impl Layer for Gru {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let shape = self.output_shape(x.shape())?;
        let (batch, steps, h) = (shape[0], shape[1], self.hidden);
        let g3 = 3 * h;
        let mut xw = vec![0.0; batch * steps * g3];
        for row in xw.chunks_mut(g3) {
            row.copy_from_slice(self.bias.value.data());
        }
        gemm(
            MatRef::new(x.data(), batch * steps, self.inputs),
            MatRef::new(self.w_input.value.data(), self.inputs, g3),
            &mut xw,
            1.0,
        );
        let u = self.w_hidden.value.data();
        let u_zr = MatRef::strided(u, h, 2 * h, g3, 1);
        let u_n = MatRef::strided(&u[2 * h..], h, h, g3, 1);

        let mut gates = Vec::with_capacity(steps);
        let mut hiddens = Vec::with_capacity(steps + 1);
        hiddens.push(vec![0.0; batch * h]);
        let mut out = vec![0.0; batch * steps * h];
        let mut rh = vec![0.0; batch * h];
        for t in 0..steps {
            let h_prev = &hiddens[t];
            let mut pre = vec![0.0; batch * g3];
            for n in 0..batch {
                pre[n * g3..][..g3].copy_from_slice(&xw[(n * steps + t) * g3..][..g3]);
            }
            gemm_into(MatRef::new(h_prev, batch, h), u_zr, &mut pre, g3, 1.0);
            for n in 0..batch {
                for k in 0..h {
                    let r = sigmoid(pre[n * g3 + h + k]);
                    pre[n * g3 + h + k] = r;
                    pre[n * g3 + k] = sigmoid(pre[n * g3 + k]);
                    rh[n * h + k] = r * h_prev[n * h + k];
                }
            }
            gemm_into(MatRef::new(&rh, batch, h), u_n, &mut pre[2 * h..], g3, 1.0);
            let mut hn = vec![0.0; batch * h];
            for n in 0..batch {
                for k in 0..h {
                    let cand = pre[n * g3 + 2 * h + k].tanh();
                    pre[n * g3 + 2 * h + k] = cand;
                    let z = pre[n * g3 + k];
                    hn[n * h + k] = (1.0 - z) * h_prev[n * h + k] + z * cand;
                }
                out[(n * steps + t) * h..][..h].copy_from_slice(&hn[n * h..][..h]);
            }
            gates.push(pre);
            hiddens.push(hn);
        }
        self.cache = Some(GruCache {
            batch,
            steps,
            x: x.data().to_vec(),
            gates,
            hiddens,
        });
        Tensor::new(shape, out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| not_run(&self.name))?;
        let (batch, steps, h) = (cache.batch, cache.steps, self.hidden);
        if grad_out.shape() != [batch, steps, h] {
            return Err(shape_err(format!(
                "{}: grad shape {:?}, expected {:?}",
                self.name,
                grad_out.shape(),
                [batch, steps, h]
            )));
        }
        let g3 = 3 * h;
        let gh = grad_out.data();
        let u = self.w_hidden.value.data();
        let u_zr = MatRef::strided(u, h, 2 * h, g3, 1);
        let u_n = MatRef::strided(&u[2 * h..], h, h, g3, 1);

        let mut dpre_all = vec![0.0; batch * steps * g3];
        let mut grad_u = vec![0.0; h * g3];
        let mut carry = vec![0.0; batch * h];
        let mut dpre = vec![0.0; batch * g3];
        let mut drh = vec![0.0; batch * h];
        let mut rh = vec![0.0; batch * h];
        for t in (0..steps).rev() {
            let gates = &cache.gates[t];
            let h_prev = &cache.hiddens[t];
            let mut dh_prev = vec![0.0; batch * h];
            for n in 0..batch {
                for k in 0..h {
                    let idx = n * h + k;
                    let row = n * g3;
                    let (z, r, cand) = (gates[row + k], gates[row + h + k], gates[row + 2 * h + k]);
                    let dh = gh[(n * steps + t) * h + k] + carry[idx];
                    dpre[row + k] = dh * (cand - h_prev[idx]) * z * (1.0 - z);
                    dpre[row + 2 * h + k] = dh * z * (1.0 - cand * cand);
                    dh_prev[idx] = dh * (1.0 - z);
                    rh[idx] = r * h_prev[idx];
                }
            }
            // Candidate branch: n_pre depends on (r * h_prev) U_n.
            let dn = MatRef::strided(&dpre[2 * h..], batch, h, g3, 1);
            gemm(dn, u_n.t(), &mut drh, 0.0);
            gemm_into(MatRef::new(&rh, batch, h).t(), dn, &mut grad_u[2 * h..], g3, 1.0);
            for n in 0..batch {
                for k in 0..h {
                    let idx = n * h + k;
                    let r = gates[n * g3 + h + k];
                    dpre[n * g3 + h + k] = drh[idx] * h_prev[idx] * r * (1.0 - r);
                    dh_prev[idx] += drh[idx] * r;
                }
            }
            let dzr = MatRef::strided(&dpre, batch, 2 * h, g3, 1);
            gemm(dzr, u_zr.t(), &mut dh_prev, 1.0);
            gemm_into(MatRef::new(h_prev, batch, h).t(), dzr, &mut grad_u, g3, 1.0);
            for n in 0..batch {
                dpre_all[(n * steps + t) * g3..][..g3].copy_from_slice(&dpre[n * g3..][..g3]);
            }
            carry = dh_prev;
        }
        let rows = batch * steps;
        let dp_all = MatRef::new(&dpre_all, rows, g3);
        let mut grad_w = vec![0.0; self.inputs * g3];
        gemm(MatRef::new(&cache.x, rows, self.inputs).t(), dp_all, &mut grad_w, 0.0);
        let mut grad_b = vec![0.0; g3];
        for row in dpre_all.chunks(g3) {
            for (acc, v) in grad_b.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut grad_x = vec![0.0; rows * self.inputs];
        gemm(
            dp_all,
            MatRef::new(self.w_input.value.data(), self.inputs, g3).t(),
            &mut grad_x,
            0.0,
        );
        self.w_input.set_grad(Tensor::new(vec![self.inputs, g3], grad_w)?);
        self.w_hidden.set_grad(Tensor::new(vec![h, g3], grad_u)?);
        self.bias.set_grad(Tensor::new(vec![g3], grad_b)?);
        Tensor::new(vec![batch, steps, self.inputs], grad_x)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let &[batch, steps, width] = expect_rank(input, 3, &self.name)? else {
            unreachable!()
        };
        if width != self.inputs {
            return Err(shape_err(format!(
                "{}: expected {} input features, got {width}",
                self.name, self.inputs
            )));
        }
        Ok(vec![batch, steps, self.hidden])
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.w_input, &self.w_hidden, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}
