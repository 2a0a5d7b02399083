//! Quasi-recurrent layer.
//!
//! Gate pre-activations are causal convolutions over time, computed for all
//! timesteps at once:
//!
//! ```text
//! Z = tanh(conv(x; W_z))   F = sigmoid(conv(x; W_f))   O = sigmoid(conv(x; W_o))
//! ```
//!
//! where `conv` at time `t` sees inputs `x[t-k+1 ..= t]` (zero before the
//! start). The only sequential part is the elementwise pooling scan, by
//! default fo-pooling:
//!
//! ```text
//! c_t = f_t * c_{t-1} + (1 - f_t) * z_t
//! h_t = o_t * c_t
//! ```
//!
//! f-pooling drops the output gate (`h_t = c_t`); ifo-pooling adds an input
//! gate `I` and uses `c_t = f_t * c_{t-1} + i_t * z_t`.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::layers::{expect_rank, not_run, Layer, Mode, Param};
use crate::rng::SeededRng;
use crate::tensor::{gemm, sigmoid, MatRef, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    F,
    #[default]
    Fo,
    Ifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Gate {
    Z = 0,
    F = 1,
    O = 2,
    I = 3,
}

impl Gate {
    fn label(self) -> &'static str {
        match self {
            Gate::Z => "z",
            Gate::F => "f",
            Gate::O => "o",
            Gate::I => "i",
        }
    }
}

impl Pooling {
    fn gates(self) -> &'static [Gate] {
        match self {
            Pooling::F => &[Gate::Z, Gate::F],
            Pooling::Fo => &[Gate::Z, Gate::F, Gate::O],
            Pooling::Ifo => &[Gate::Z, Gate::F, Gate::O, Gate::I],
        }
    }
}

/// Gate activations, each `(batch, time, hidden)`.
#[derive(Debug, Clone)]
pub struct QrnnGates {
    pub z: Tensor,
    pub f: Tensor,
    pub o: Option<Tensor>,
    pub i: Option<Tensor>,
}

#[derive(Debug, Clone)]
pub struct Qrnn {
    name: String,
    inputs: usize,
    hidden: usize,
    window: usize,
    pooling: Pooling,
    // One (weight [hidden, inputs, window], bias [hidden]) pair per gate, in
    // `pooling.gates()` order.
    weights: Vec<Param>,
    biases: Vec<Param>,
    cache: Option<QrnnCache>,
}

#[derive(Debug, Clone)]
struct QrnnCache {
    batch: usize,
    steps: usize,
    cols: Vec<f64>,
    gates: Vec<Vec<f64>>,
    // c_0 ..= c_T per batch row: (batch, steps + 1, hidden)
    cells: Vec<f64>,
}

/// Gradients of `<grad_h, H>` from [`Qrnn::backward_full`].
#[derive(Debug, Clone)]
pub struct QrnnGrads {
    pub input: Tensor,
    pub initial_state: Tensor,
    /// `(weight, bias)` per gate, named like the layer's parameters.
    pub params: Vec<(String, Tensor)>,
}

impl Qrnn {
    pub fn new(
        name: &str,
        inputs: usize,
        hidden: usize,
        window: usize,
        pooling: Pooling,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if inputs == 0 || hidden == 0 || window == 0 {
            return Err(Error::Config(format!(
                "{name}: inputs, hidden and window must be >= 1"
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for gate in pooling.gates() {
            let w = Tensor::glorot_uniform(
                &[hidden, inputs, window],
                inputs * window,
                hidden,
                rng,
            )?;
            weights.push(Param::new(format!("{name}.w_{}", gate.label()), w));
            biases.push(Param::new(
                format!("{name}.b_{}", gate.label()),
                Tensor::zeros(&[hidden]),
            ));
        }
        Ok(Self {
            name: name.to_owned(),
            inputs,
            hidden,
            window,
            pooling,
            weights,
            biases,
            cache: None,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    /// Replace all gate parameters, e.g. with hand-built fixtures.
    /// `weights` and `biases` follow the gate order z, f, o, i.
    pub fn set_params(&mut self, weights: Vec<Tensor>, biases: Vec<Tensor>) -> Result<()> {
        if weights.len() != self.weights.len() || biases.len() != self.biases.len() {
            return Err(shape_err(format!(
                "{}: expected {} gates",
                self.name,
                self.weights.len()
            )));
        }
        for (p, w) in self.weights.iter_mut().zip(weights) {
            if w.shape() != p.value.shape() {
                return Err(shape_err(format!("{}: bad shape {:?}", p.name, w.shape())));
            }
            p.value = w;
        }
        for (p, b) in self.biases.iter_mut().zip(biases) {
            if b.shape() != p.value.shape() {
                return Err(shape_err(format!("{}: bad shape {:?}", p.name, b.shape())));
            }
            p.value = b;
        }
        Ok(())
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize)> {
        let shape = self.output_shape(x.shape())?;
        Ok((shape[0], shape[1]))
    }

    /// Causal im2col: row `(n, t)` holds `x[n, t + j - (k - 1), i]` at column
    /// `i * k + j`.
    fn im2col(&self, x: &[f64], batch: usize, steps: usize) -> Vec<f64> {
        let (k, inputs) = (self.window, self.inputs);
        let width = inputs * k;
        let mut cols = vec![0.0; batch * steps * width];
        for n in 0..batch {
            for t in 0..steps {
                let row = &mut cols[(n * steps + t) * width..][..width];
                for j in 0..k {
                    let Some(src_t) = (t + j).checked_sub(k - 1) else {
                        continue;
                    };
                    let src = &x[(n * steps + src_t) * inputs..][..inputs];
                    for (i, &v) in src.iter().enumerate() {
                        row[i * k + j] = v;
                    }
                }
            }
        }
        cols
    }

    fn gate_activations(&self, cols: &[f64], rows: usize) -> Vec<Vec<f64>> {
        let width = self.inputs * self.window;
        let h = self.hidden;
        self.pooling
            .gates()
            .iter()
            .zip(self.weights.iter().zip(&self.biases))
            .map(|(&gate, (w, b))| {
                let mut pre = vec![0.0; rows * h];
                for row in pre.chunks_mut(h) {
                    row.copy_from_slice(b.value.data());
                }
                gemm(
                    MatRef::new(cols, rows, width),
                    MatRef::new(w.value.data(), h, width).t(),
                    &mut pre,
                    1.0,
                );
                let act: fn(f64) -> f64 = if gate == Gate::Z { f64::tanh } else { sigmoid };
                pre.iter_mut().for_each(|v| *v = act(*v));
                pre
            })
            .collect()
    }

    /// Gate activations for `x` of shape `(batch, time, inputs)`. No recurrence
    /// is involved, so every timestep is computed independently.
    pub fn gates(&self, x: &Tensor) -> Result<QrnnGates> {
        let (batch, steps) = self.dims(x)?;
        let cols = self.im2col(x.data(), batch, steps);
        let acts = self.gate_activations(&cols, batch * steps);
        let shape = [batch, steps, self.hidden];
        let mut slots: [Option<Tensor>; 4] = Default::default();
        for (&gate, act) in self.pooling.gates().iter().zip(acts) {
            slots[gate as usize] = Some(Tensor::new(shape.to_vec(), act)?);
        }
        let [z, f, o, i] = slots;
        Ok(QrnnGates {
            z: z.expect("z gate"),
            f: f.expect("f gate"),
            o,
            i,
        })
    }

    /// Forward pass with an explicit initial cell state `(batch, hidden)`;
    /// `None` means zeros. Returns `H` of shape `(batch, time, hidden)` and
    /// the final cell state.
    pub fn forward_with_state(
        &mut self,
        x: &Tensor,
        initial: Option<&Tensor>,
    ) -> Result<(Tensor, Tensor)> {
        let (batch, steps) = self.dims(x)?;
        let h = self.hidden;
        let c0 = match initial {
            Some(c0) if c0.shape() == [batch, h] => c0.data().to_vec(),
            Some(c0) => {
                return Err(shape_err(format!(
                    "{}: initial state {:?}, expected {:?}",
                    self.name,
                    c0.shape(),
                    [batch, h]
                )))
            }
            None => vec![0.0; batch * h],
        };
        let cols = self.im2col(x.data(), batch, steps);
        let gates = self.gate_activations(&cols, batch * steps);
        let mut cells = vec![0.0; batch * (steps + 1) * h];
        let mut out = vec![0.0; batch * steps * h];
        for n in 0..batch {
            cells[n * (steps + 1) * h..][..h].copy_from_slice(&c0[n * h..][..h]);
        }
        self.scan(&gates, batch, steps, &mut cells, &mut out);
        let mut last = vec![0.0; batch * h];
        for n in 0..batch {
            last[n * h..][..h].copy_from_slice(&cells[(n * (steps + 1) + steps) * h..][..h]);
        }
        self.cache = Some(QrnnCache {
            batch,
            steps,
            cols,
            gates,
            cells,
        });
        Ok((
            Tensor::new(vec![batch, steps, h], out)?,
            Tensor::new(vec![batch, h], last)?,
        ))
    }

    fn scan(&self, gates: &[Vec<f64>], batch: usize, steps: usize, cells: &mut [f64], out: &mut [f64]) {
        let h = self.hidden;
        let (z, f) = (&gates[0], &gates[1]);
        for n in 0..batch {
            for t in 0..steps {
                let g = (n * steps + t) * h;
                let prev = (n * (steps + 1) + t) * h;
                let cur = prev + h;
                for u in 0..h {
                    let c_prev = cells[prev + u];
                    let c = match self.pooling {
                        Pooling::Ifo => f[g + u] * c_prev + gates[3][g + u] * z[g + u],
                        _ => f[g + u] * c_prev + (1.0 - f[g + u]) * z[g + u],
                    };
                    cells[cur + u] = c;
                    out[g + u] = match self.pooling {
                        Pooling::F => c,
                        _ => gates[2][g + u] * c,
                    };
                }
            }
        }
    }

    /// Exact gradients of `<grad_h, H>` for the most recent forward pass.
    pub fn backward_full(&self, grad_h: &Tensor) -> Result<QrnnGrads> {
        let cache = self.cache.as_ref().ok_or_else(|| not_run(&self.name))?;
        let (batch, steps, h) = (cache.batch, cache.steps, self.hidden);
        if grad_h.shape() != [batch, steps, h] {
            return Err(shape_err(format!(
                "{}: grad shape {:?}, expected {:?}",
                self.name,
                grad_h.shape(),
                [batch, steps, h]
            )));
        }
        let gh = grad_h.data();
        let gates = &cache.gates;
        let cells = &cache.cells;
        let n_gates = gates.len();
        // Gradients w.r.t. gate activations, then pre-activations.
        let mut d: Vec<Vec<f64>> = vec![vec![0.0; batch * steps * h]; n_gates];
        let mut grad_c0 = vec![0.0; batch * h];
        for n in 0..batch {
            let mut carry = vec![0.0; h];
            for t in (0..steps).rev() {
                let g = (n * steps + t) * h;
                let prev = (n * (steps + 1) + t) * h;
                let cur = prev + h;
                for u in 0..h {
                    let c = cells[cur + u];
                    let c_prev = cells[prev + u];
                    let dc = match self.pooling {
                        Pooling::F => gh[g + u] + carry[u],
                        _ => {
                            d[2][g + u] = gh[g + u] * c;
                            gh[g + u] * gates[2][g + u] + carry[u]
                        }
                    };
                    let f = gates[1][g + u];
                    let z = gates[0][g + u];
                    if self.pooling == Pooling::Ifo {
                        let i = gates[3][g + u];
                        d[1][g + u] = dc * c_prev;
                        d[3][g + u] = dc * z;
                        d[0][g + u] = dc * i;
                    } else {
                        d[1][g + u] = dc * (c_prev - z);
                        d[0][g + u] = dc * (1.0 - f);
                    }
                    carry[u] = dc * f;
                }
            }
            grad_c0[n * h..][..h].copy_from_slice(&carry);
        }
        for (k, (dk, act)) in d.iter_mut().zip(gates).enumerate() {
            for (dv, a) in dk.iter_mut().zip(act) {
                *dv *= if k == 0 { 1.0 - a * a } else { a * (1.0 - a) };
            }
        }

        let rows = batch * steps;
        let width = self.inputs * self.window;
        let mut grad_cols = vec![0.0; rows * width];
        let mut params = Vec::with_capacity(2 * n_gates);
        for (k, dk) in d.iter().enumerate() {
            let mut gw = vec![0.0; h * width];
            gemm(
                MatRef::new(dk, rows, h).t(),
                MatRef::new(&cache.cols, rows, width),
                &mut gw,
                0.0,
            );
            let mut gb = vec![0.0; h];
            for row in dk.chunks(h) {
                for (acc, v) in gb.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            gemm(
                MatRef::new(dk, rows, h),
                MatRef::new(self.weights[k].value.data(), h, width),
                &mut grad_cols,
                1.0,
            );
            params.push((
                self.weights[k].name.clone(),
                Tensor::new(vec![h, self.inputs, self.window], gw)?,
            ));
            params.push((self.biases[k].name.clone(), Tensor::new(vec![h], gb)?));
        }

        let (kw, inputs) = (self.window, self.inputs);
        let mut grad_x = vec![0.0; batch * steps * inputs];
        for n in 0..batch {
            for t in 0..steps {
                let row = &grad_cols[(n * steps + t) * width..][..width];
                for j in 0..kw {
                    let Some(src_t) = (t + j).checked_sub(kw - 1) else {
                        continue;
                    };
                    let dst = &mut grad_x[(n * steps + src_t) * inputs..][..inputs];
                    for (i, v) in dst.iter_mut().enumerate() {
                        *v += row[i * kw + j];
                    }
                }
            }
        }
        Ok(QrnnGrads {
            input: Tensor::new(vec![batch, steps, inputs], grad_x)?,
            initial_state: Tensor::new(vec![batch, h], grad_c0)?,
            params,
        })
    }
}

impl Layer for Qrnn {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        Ok(self.forward_with_state(x, None)?.0)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let grads = self.backward_full(grad_out)?;
        let mut it = grads.params.into_iter();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.set_grad(it.next().expect("weight grad").1);
            b.set_grad(it.next().expect("bias grad").1);
        }
        Ok(grads.input)
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
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }
}

/// The fo-pooling scan on precomputed gates, each `(batch, time, hidden)`.
///
/// `initial` is the starting cell state `(batch, hidden)`, zeros when
/// absent. Returns the hidden sequence and the final cell state.
pub fn fo_pool(
    z: &Tensor,
    f: &Tensor,
    o: &Tensor,
    initial: Option<&Tensor>,
) -> Result<(Tensor, Tensor)> {
    let &[batch, steps, hidden] = z.shape() else {
        return Err(shape_err(format!("fo_pool gates must be 3-D, got {:?}", z.shape())));
    };
    if f.shape() != z.shape() || o.shape() != z.shape() {
        return Err(shape_err(format!(
            "fo_pool gate shapes differ: {:?} {:?} {:?}",
            z.shape(),
            f.shape(),
            o.shape()
        )));
    }
    let mut c = match initial {
        Some(c0) if c0.shape() == [batch, hidden] => c0.data().to_vec(),
        Some(c0) => {
            return Err(shape_err(format!(
                "fo_pool initial state {:?}, expected {:?}",
                c0.shape(),
                [batch, hidden]
            )))
        }
        None => vec![0.0; batch * hidden],
    };
    let (zd, fd, od) = (z.data(), f.data(), o.data());
    let mut out = vec![0.0; zd.len()];
    for n in 0..batch {
        for t in 0..steps {
            let g = (n * steps + t) * hidden;
            for u in 0..hidden {
                let cell = &mut c[n * hidden + u];
                *cell = fd[g + u] * *cell + (1.0 - fd[g + u]) * zd[g + u];
                out[g + u] = od[g + u] * *cell;
            }
        }
    }
    Ok((
        Tensor::new(z.shape().to_vec(), out)?,
        Tensor::new(vec![batch, hidden], c)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Dense;

    fn zero_qrnn(inputs: usize, hidden: usize, window: usize) -> Qrnn {
        let mut q = Qrnn::new("q", inputs, hidden, window, Pooling::Fo, &mut SeededRng::new(0)).unwrap();
        let w = (0..3).map(|_| Tensor::zeros(&[hidden, inputs, window])).collect();
        let b = (0..3).map(|_| Tensor::zeros(&[hidden])).collect();
        q.set_params(w, b).unwrap();
        q
    }

    #[test]
    fn zero_weights_give_neutral_gates() {
        let q = zero_qrnn(2, 3, 2);
        let x = Tensor::randn(&[2, 5, 2], 1.0, &mut SeededRng::new(1));
        let g = q.gates(&x).unwrap();
        assert!(g.z.data().iter().all(|&v| v == 0.0));
        assert!(g.f.data().iter().all(|&v| v == 0.5));
        assert!(g.o.unwrap().data().iter().all(|&v| v == 0.5));
        assert!(g.i.is_none());
    }

    #[test]
    fn unit_window_is_per_step_dense() {
        let mut rng = SeededRng::new(2);
        let q = Qrnn::new("q", 3, 4, 1, Pooling::Fo, &mut rng).unwrap();
        let mut q2 = q.clone();
        let bias: Vec<Tensor> = (0..3).map(|_| Tensor::randn(&[4], 1.0, &mut rng)).collect();
        let weights: Vec<Tensor> = q.params().iter().step_by(2).map(|p| p.value.clone()).collect();
        q2.set_params(weights.clone(), bias.clone()).unwrap();
        let x = Tensor::randn(&[2, 5, 3], 1.0, &mut rng);
        let gates = q2.gates(&x).unwrap();
        let acts = [&gates.z, &gates.f, gates.o.as_ref().unwrap()];
        for (k, act) in acts.iter().enumerate() {
            // W_g as a dense (in, hidden) matrix: transpose of (hidden, in, 1).
            let w = weights[k].reshape(&[4, 3]).unwrap();
            let wt = Tensor::new(
                vec![3, 4],
                (0..3).flat_map(|i| (0..4).map(move |h| (i, h))).map(|(i, h)| w.get(&[h, i])).collect(),
            )
            .unwrap();
            let mut dense = Dense::from_weights("d", wt, bias[k].clone()).unwrap();
            for n in 0..2 {
                for t in 0..5 {
                    let xt = Tensor::new(vec![1, 3], (0..3).map(|i| x.get(&[n, t, i])).collect()).unwrap();
                    let pre = dense.forward_dense(&xt).unwrap();
                    for h in 0..4 {
                        let expected = if k == 0 { pre.data()[h].tanh() } else { sigmoid(pre.data()[h]) };
                        assert!((act.get(&[n, t, h]) - expected).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn gates_are_causal() {
        let mut rng = SeededRng::new(3);
        let q = Qrnn::new("q", 2, 3, 3, Pooling::Fo, &mut rng).unwrap();
        let x = Tensor::randn(&[1, 6, 2], 1.0, &mut rng);
        let base = q.gates(&x).unwrap();
        for t in 0..6 {
            let mut data = x.data().to_vec();
            data[t * 2] += 1.0;
            data[t * 2 + 1] -= 2.0;
            let g = q.gates(&Tensor::new(vec![1, 6, 2], data).unwrap()).unwrap();
            let prefix = t * 3;
            assert_eq!(&g.z.data()[..prefix], &base.z.data()[..prefix]);
            assert_eq!(&g.f.data()[..prefix], &base.f.data()[..prefix]);
            assert_eq!(
                &g.o.as_ref().unwrap().data()[..prefix],
                &base.o.as_ref().unwrap().data()[..prefix]
            );
        }
    }

    fn t3(data: &[f64]) -> Tensor {
        Tensor::new(vec![1, data.len(), 1], data.to_vec()).unwrap()
    }

    #[test]
    fn pooling_degenerate_cases() {
        let z = t3(&[0.3, -0.7, 0.9]);
        let c0 = Tensor::new(vec![1, 1], vec![0.4]).unwrap();
        let (h, c) = fo_pool(&z, &t3(&[1.0; 3]), &t3(&[1.0; 3]), Some(&c0)).unwrap();
        assert_eq!(h.data(), &[0.4, 0.4, 0.4]);
        assert_eq!(c.data(), &[0.4]);
        let (h, _) = fo_pool(&z, &t3(&[0.0; 3]), &t3(&[1.0; 3]), Some(&c0)).unwrap();
        assert_eq!(h.data(), z.data());
    }

    #[test]
    fn pooling_hand_evaluated() {
        let (h, c) = fo_pool(&t3(&[0.5, -0.5]), &t3(&[0.5, 0.5]), &t3(&[1.0, 1.0]), None).unwrap();
        assert_eq!(h.data(), &[0.25, -0.125]);
        assert_eq!(c.data(), &[-0.125]);
    }

    #[test]
    fn pooling_shape_mismatch() {
        let err = fo_pool(&t3(&[0.0, 0.0]), &t3(&[0.0]), &t3(&[0.0, 0.0]), None);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn layer_forward_matches_gates_plus_pool() {
        let mut rng = SeededRng::new(4);
        let mut q = Qrnn::new("q", 3, 5, 2, Pooling::Fo, &mut rng).unwrap();
        let x = Tensor::randn(&[2, 7, 3], 1.0, &mut rng);
        let g = q.gates(&x).unwrap();
        let (expected, _) = fo_pool(&g.z, &g.f, g.o.as_ref().unwrap(), None).unwrap();
        let (h, _) = q.forward_with_state(&x, None).unwrap();
        assert_eq!(h, expected);
    }

    #[test]
    fn backward_before_forward() {
        let q = zero_qrnn(1, 1, 2);
        assert!(matches!(
            q.backward_full(&Tensor::zeros(&[1, 1, 1])),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = SeededRng::new(5);
        for pooling in [Pooling::F, Pooling::Fo, Pooling::Ifo] {
            let mut q = Qrnn::new("q", 2, 3, 2, pooling, &mut rng).unwrap();
            q.forward(&Tensor::randn(&[1, 4, 2], 1.0, &mut rng), Mode::Train).unwrap();
            let g = q.backward_full(&Tensor::zeros(&[1, 4, 3])).unwrap();
            assert_eq!(g.input.max_abs(), 0.0);
            assert_eq!(g.initial_state.max_abs(), 0.0);
            assert!(g.params.iter().all(|(_, t)| t.max_abs() == 0.0));
        }
    }
}
