use super::{expect_rank, not_run, Layer, Mode, Param};
use crate::error::{shape_err, Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{gemm, MatRef, Tensor};

/// 1-D convolution over `(batch, channels, length)` with "same" zero padding.
///
/// Uses the cross-correlation convention:
/// `y[b,o,t] = bias[o] + sum_{i,j} w[o,i,j] * x[b,i,t+j-k/2]`.
/// Weights have shape `(out_channels, in_channels, kernel_size)`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    name: String,
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    weight: Param,
    bias: Param,
    cache: Option<ConvCache>,
}

#[derive(Debug, Clone)]
struct ConvCache {
    batch: usize,
    len: usize,
    // im2col matrix, (in_channels * k) x (batch * len)
    cols: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Conv1dGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Conv1d {
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if kernel_size == 0 {
            return Err(Error::Config(format!("{name}: kernel size must be >= 1")));
        }
        let weight = Tensor::glorot_uniform(
            &[out_channels, in_channels, kernel_size],
            in_channels * kernel_size,
            out_channels * kernel_size,
            rng,
        )?;
        Self::from_weights(name, weight, Tensor::zeros(&[out_channels]))
    }

    pub fn from_weights(name: &str, weight: Tensor, bias: Tensor) -> Result<Self> {
        let &[out_channels, in_channels, kernel_size] = weight.shape() else {
            return Err(shape_err(format!(
                "{name}: conv weight must be 3-D, got {:?}",
                weight.shape()
            )));
        };
        if bias.shape() != [out_channels] {
            return Err(shape_err(format!(
                "{name}: bias shape {:?} does not match {out_channels} filters",
                bias.shape()
            )));
        }
        Ok(Self {
            name: name.to_owned(),
            in_channels,
            out_channels,
            kernel_size,
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            cache: None,
        })
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight.value
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias.value
    }

    fn im2col(&self, x: &[f64], batch: usize, len: usize) -> Vec<f64> {
        let k = self.kernel_size;
        let pad = k / 2;
        let width = batch * len;
        let mut cols = vec![0.0; self.in_channels * k * width];
        for i in 0..self.in_channels {
            for j in 0..k {
                let row = &mut cols[(i * k + j) * width..(i * k + j + 1) * width];
                // Source position is t + j - pad.
                let t_lo = pad.saturating_sub(j);
                let t_hi = (len + pad).saturating_sub(j).min(len);
                for n in 0..batch {
                    let src = &x[(n * self.in_channels + i) * len..][..len];
                    for t in t_lo..t_hi {
                        row[n * len + t] = src[t + j - pad];
                    }
                }
            }
        }
        cols
    }

    /// Forward pass returning `(batch, out_channels, length)`.
    pub fn forward_conv(&mut self, x: &Tensor) -> Result<Tensor> {
        let shape = self.output_shape(x.shape())?;
        let (batch, len) = (shape[0], shape[2]);
        let cols = self.im2col(x.data(), batch, len);
        let width = batch * len;
        let ck = self.in_channels * self.kernel_size;
        let mut y2 = vec![0.0; self.out_channels * width];
        gemm(
            MatRef::new(self.weight.value.data(), self.out_channels, ck),
            MatRef::new(&cols, ck, width),
            &mut y2,
            0.0,
        );
        let bias = self.bias.value.data();
        let mut out = vec![0.0; y2.len()];
        for n in 0..batch {
            for o in 0..self.out_channels {
                let dst = &mut out[(n * self.out_channels + o) * len..][..len];
                let src = &y2[o * width + n * len..][..len];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = s + bias[o];
                }
            }
        }
        self.cache = Some(ConvCache { batch, len, cols });
        Tensor::new(shape, out)
    }

    /// Gradients of `<grad_out, y>` with respect to input, weight and bias.
    pub fn backward_conv(&self, grad_out: &Tensor) -> Result<Conv1dGrads> {
        let cache = self.cache.as_ref().ok_or_else(|| not_run(&self.name))?;
        let (batch, len) = (cache.batch, cache.len);
        if grad_out.shape() != [batch, self.out_channels, len] {
            return Err(shape_err(format!(
                "{}: grad shape {:?}, expected {:?}",
                self.name,
                grad_out.shape(),
                [batch, self.out_channels, len]
            )));
        }
        let width = batch * len;
        let k = self.kernel_size;
        let ck = self.in_channels * k;
        let g = grad_out.data();

        let mut g2 = vec![0.0; self.out_channels * width];
        let mut grad_bias = vec![0.0; self.out_channels];
        for n in 0..batch {
            for o in 0..self.out_channels {
                let src = &g[(n * self.out_channels + o) * len..][..len];
                g2[o * width + n * len..][..len].copy_from_slice(src);
            }
        }
        for (o, gb) in grad_bias.iter_mut().enumerate() {
            *gb = g2[o * width..(o + 1) * width].iter().sum();
        }

        let mut grad_w = vec![0.0; self.out_channels * ck];
        gemm(
            MatRef::new(&g2, self.out_channels, width),
            MatRef::new(&cache.cols, ck, width).t(),
            &mut grad_w,
            0.0,
        );

        let mut gcols = vec![0.0; ck * width];
        gemm(
            MatRef::new(self.weight.value.data(), self.out_channels, ck).t(),
            MatRef::new(&g2, self.out_channels, width),
            &mut gcols,
            0.0,
        );
        let pad = k / 2;
        let mut grad_in = vec![0.0; batch * self.in_channels * len];
        for i in 0..self.in_channels {
            for j in 0..k {
                let row = &gcols[(i * k + j) * width..][..width];
                let t_lo = pad.saturating_sub(j);
                let t_hi = (len + pad).saturating_sub(j).min(len);
                for n in 0..batch {
                    let dst = &mut grad_in[(n * self.in_channels + i) * len..][..len];
                    for t in t_lo..t_hi {
                        dst[t + j - pad] += row[n * len + t];
                    }
                }
            }
        }

        Ok(Conv1dGrads {
            input: Tensor::new(vec![batch, self.in_channels, len], grad_in)?,
            weight: Tensor::new(vec![self.out_channels, self.in_channels, k], grad_w)?,
            bias: Tensor::new(vec![self.out_channels], grad_bias)?,
        })
    }
}

impl Layer for Conv1d {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        self.forward_conv(x)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let grads = self.backward_conv(grad_out)?;
        self.weight.set_grad(grads.weight);
        self.bias.set_grad(grads.bias);
        Ok(grads.input)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let &[batch, channels, len] = expect_rank(input, 3, &self.name)? else {
            unreachable!()
        };
        if channels != self.in_channels {
            return Err(shape_err(format!(
                "{}: expected {} input channels, got {channels}",
                self.name, self.in_channels
            )));
        }
        Ok(vec![batch, self.out_channels, len])
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
