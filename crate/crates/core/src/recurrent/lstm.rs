//! Standard LSTM (no peepholes).
//!
//! Packed gate order along the `4 * hidden` axis is input, forget,
//! candidate, output:
//!
//! ```text
//! [i f g o] = [sig sig tanh sig](x_t W + h_{t-1} U + b)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```

use crate::error::{shape_err, Error, Result};
use crate::layers::{expect_rank, not_run, Layer, Mode, Param};
use crate::rng::SeededRng;
use crate::tensor::{gemm, sigmoid, MatRef, Tensor};

#[derive(Debug, Clone)]
pub struct Lstm {
    name: String,
    inputs: usize,
    hidden: usize,
    w_input: Param,
    w_hidden: Param,
    bias: Param,
    cache: Option<LstmCache>,
}

#[derive(Debug, Clone)]
struct LstmCache {
    batch: usize,
    steps: usize,
    x: Vec<f64>,
    // Per step, each (batch, ...) contiguous.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    hiddens: Vec<Vec<f64>>,
}

impl Lstm {
    pub fn new(name: &str, inputs: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        if inputs == 0 || hidden == 0 {
            return Err(Error::Config(format!("{name}: inputs and hidden must be >= 1")));
        }
        let w_input = Tensor::glorot_uniform(&[inputs, 4 * hidden], inputs, 4 * hidden, rng)?;
        let w_hidden = Tensor::glorot_uniform(&[hidden, 4 * hidden], hidden, 4 * hidden, rng)?;
        Ok(Self {
            name: name.to_owned(),
            inputs,
            hidden,
            w_input: Param::new(format!("{name}.w_input"), w_input),
            w_hidden: Param::new(format!("{name}.w_hidden"), w_hidden),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[4 * hidden])),
            cache: None,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Replace weights: `w_input (in, 4H)`, `w_hidden (H, 4H)`, `bias (4H)`.
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
}

impl Layer for Lstm {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let shape = self.output_shape(x.shape())?;
        let (batch, steps, h) = (shape[0], shape[1], self.hidden);
        let g4 = 4 * h;
        // Input projections for every timestep in one product.
        let mut xw = vec![0.0; batch * steps * g4];
        for row in xw.chunks_mut(g4) {
            row.copy_from_slice(self.bias.value.data());
        }
        gemm(
            MatRef::new(x.data(), batch * steps, self.inputs),
            MatRef::new(self.w_input.value.data(), self.inputs, g4),
            &mut xw,
            1.0,
        );

        let u = MatRef::new(self.w_hidden.value.data(), h, g4);
        let mut gates = Vec::with_capacity(steps);
        let mut cells = Vec::with_capacity(steps + 1);
        let mut hiddens = Vec::with_capacity(steps + 1);
        cells.push(vec![0.0; batch * h]);
        hiddens.push(vec![0.0; batch * h]);
        let mut out = vec![0.0; batch * steps * h];
        for t in 0..steps {
            let mut pre = vec![0.0; batch * g4];
            for n in 0..batch {
                pre[n * g4..][..g4].copy_from_slice(&xw[(n * steps + t) * g4..][..g4]);
            }
            gemm(MatRef::new(&hiddens[t], batch, h), u, &mut pre, 1.0);
            let c_prev = &cells[t];
            let mut c = vec![0.0; batch * h];
            let mut hn = vec![0.0; batch * h];
            for n in 0..batch {
                let row = &mut pre[n * g4..][..g4];
                for k in 0..h {
                    let i = sigmoid(row[k]);
                    let f = sigmoid(row[h + k]);
                    let g = row[2 * h + k].tanh();
                    let o = sigmoid(row[3 * h + k]);
                    row[k] = i;
                    row[h + k] = f;
                    row[2 * h + k] = g;
                    row[3 * h + k] = o;
                    let cell = f * c_prev[n * h + k] + i * g;
                    c[n * h + k] = cell;
                    hn[n * h + k] = o * cell.tanh();
                }
                out[(n * steps + t) * h..][..h].copy_from_slice(&hn[n * h..][..h]);
            }
            gates.push(pre);
            cells.push(c);
            hiddens.push(hn);
        }
        self.cache = Some(LstmCache {
            batch,
            steps,
            x: x.data().to_vec(),
            gates,
            cells,
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
        let g4 = 4 * h;
        let gh = grad_out.data();
        let u = MatRef::new(self.w_hidden.value.data(), h, g4);
        let mut dpre_all = vec![0.0; batch * steps * g4];
        let mut grad_u = vec![0.0; h * g4];
        let mut dh_carry = vec![0.0; batch * h];
        let mut dc_carry = vec![0.0; batch * h];
        let mut dpre = vec![0.0; batch * g4];
        for t in (0..steps).rev() {
            let gates = &cache.gates[t];
            let c = &cache.cells[t + 1];
            let c_prev = &cache.cells[t];
            for n in 0..batch {
                for k in 0..h {
                    let idx = n * h + k;
                    let row = n * g4;
                    let (i, f, g, o) = (
                        gates[row + k],
                        gates[row + h + k],
                        gates[row + 2 * h + k],
                        gates[row + 3 * h + k],
                    );
                    let tc = c[idx].tanh();
                    let dh = gh[(n * steps + t) * h + k] + dh_carry[idx];
                    let dc = dh * o * (1.0 - tc * tc) + dc_carry[idx];
                    dpre[row + k] = dc * g * i * (1.0 - i);
                    dpre[row + h + k] = dc * c_prev[idx] * f * (1.0 - f);
                    dpre[row + 2 * h + k] = dc * i * (1.0 - g * g);
                    dpre[row + 3 * h + k] = dh * tc * o * (1.0 - o);
                    dc_carry[idx] = dc * f;
                }
                dpre_all[(n * steps + t) * g4..][..g4].copy_from_slice(&dpre[n * g4..][..g4]);
            }
            let dp = MatRef::new(&dpre, batch, g4);
            gemm(dp, u.t(), &mut dh_carry, 0.0);
            gemm(MatRef::new(&cache.hiddens[t], batch, h).t(), dp, &mut grad_u, 1.0);
        }
        let rows = batch * steps;
        let dp_all = MatRef::new(&dpre_all, rows, g4);
        let mut grad_w = vec![0.0; self.inputs * g4];
        gemm(MatRef::new(&cache.x, rows, self.inputs).t(), dp_all, &mut grad_w, 0.0);
        let mut grad_b = vec![0.0; g4];
        for row in dpre_all.chunks(g4) {
            for (acc, v) in grad_b.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut grad_x = vec![0.0; rows * self.inputs];
        gemm(
            dp_all,
            MatRef::new(self.w_input.value.data(), self.inputs, g4).t(),
            &mut grad_x,
            0.0,
        );
        self.w_input.set_grad(Tensor::new(vec![self.inputs, g4], grad_w)?);
        self.w_hidden.set_grad(Tensor::new(vec![h, g4], grad_u)?);
        self.bias.set_grad(Tensor::new(vec![g4], grad_b)?);
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_hidden() {
        let mut lstm = Lstm::new("l", 2, 3, &mut SeededRng::new(0)).unwrap();
        lstm.set_params(Tensor::zeros(&[2, 12]), Tensor::zeros(&[3, 12]), Tensor::zeros(&[12]))
            .unwrap();
        let x = Tensor::randn(&[2, 4, 2], 1.0, &mut SeededRng::new(1));
        let h = lstm.forward(&x, Mode::Eval).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_matches_cell_formula() {
        let mut rng = SeededRng::new(2);
        let mut lstm = Lstm::new("l", 2, 1, &mut rng).unwrap();
        let b = Tensor::new(vec![4], vec![0.1, -0.2, 0.3, 0.4]).unwrap();
        let w = Tensor::new(vec![2, 4], vec![0.5, -0.5, 1.0, 0.2, 0.3, 0.7, -1.0, 0.1]).unwrap();
        lstm.set_params(w, Tensor::zeros(&[1, 4]), b).unwrap();
        let x = Tensor::new(vec![1, 1, 2], vec![1.0, 2.0]).unwrap();
        let h = lstm.forward(&x, Mode::Eval).unwrap();
        // Pre-activations by hand: x W + b.
        let i = sigmoid(1.0 * 0.5 + 2.0 * 0.3 + 0.1);
        let g = (1.0 * 1.0 + 2.0 * -1.0 + 0.3f64).tanh();
        let o = sigmoid(1.0 * 0.2 + 2.0 * 0.1 + 0.4);
        let expected = o * (i * g).tanh();
        assert!((h.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn cell_state_is_bounded_by_step_count() {
        let mut rng = SeededRng::new(3);
        let mut lstm = Lstm::new("l", 3, 4, &mut rng).unwrap();
        let x = Tensor::randn(&[2, 8, 3], 3.0, &mut rng);
        lstm.forward(&x, Mode::Eval).unwrap();
        let cache = lstm.cache.as_ref().unwrap();
        for (t, c) in cache.cells.iter().enumerate() {
            assert!(c.iter().all(|v| v.abs() <= t as f64 + 1e-12));
        }
        for gates in &cache.gates {
            for row in gates.chunks(16) {
                for k in 0..4 {
                    for gate in [0, 1, 3] {
                        let v = row[gate * 4 + k];
                        assert!(v > 0.0 && v < 1.0);
                    }
                    assert!(row[8 + k].abs() < 1.0);
                }
            }
        }
    }
}
