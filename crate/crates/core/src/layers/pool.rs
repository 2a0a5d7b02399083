use super::{expect_rank, not_run, Layer, Mode};
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Max pooling along the length axis of `(batch, channels, length)`.
///
/// Ties go to the lowest index in the window.
#[derive(Debug, Clone)]
pub struct MaxPool1d {
    name: String,
    pool_size: usize,
    stride: usize,
    cache: Option<PoolCache>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    input_shape: Vec<usize>,
    // flat input offset of each output's winner
    argmax: Vec<usize>,
}

impl MaxPool1d {
    pub fn new(name: &str, pool_size: usize, stride: usize) -> Result<Self> {
        if pool_size == 0 || stride == 0 {
            return Err(Error::Config(format!(
                "{name}: pool size and stride must be >= 1"
            )));
        }
        Ok(Self {
            name: name.to_owned(),
            pool_size,
            stride,
            cache: None,
        })
    }

    /// Flat input offsets selected by the most recent forward pass.
    pub fn argmax(&self) -> Option<&[usize]> {
        self.cache.as_ref().map(|c| c.argmax.as_slice())
    }
}

impl Layer for MaxPool1d {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let shape = self.output_shape(x.shape())?;
        let (rows, len, out_len) = (shape[0] * shape[1], x.shape()[2], shape[2]);
        let data = x.data();
        let mut out = Vec::with_capacity(rows * out_len);
        let mut argmax = Vec::with_capacity(rows * out_len);
        for r in 0..rows {
            for t in 0..out_len {
                let start = r * len + t * self.stride;
                let mut best = start;
                for idx in start + 1..start + self.pool_size {
                    if data[idx] > data[best] {
                        best = idx;
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
        self.cache = Some(PoolCache {
            input_shape: x.shape().to_vec(),
            argmax,
        });
        Tensor::new(shape, out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| not_run(&self.name))?;
        if grad_out.len() != cache.argmax.len() {
            return Err(shape_err(format!(
                "{}: grad has {} elements, expected {}",
                self.name,
                grad_out.len(),
                cache.argmax.len()
            )));
        }
        let mut grad_in = Tensor::zeros(&cache.input_shape);
        let dst = grad_in.data_mut();
        for (&idx, g) in cache.argmax.iter().zip(grad_out.data()) {
            dst[idx] += g;
        }
        Ok(grad_in)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let &[batch, channels, len] = expect_rank(input, 3, &self.name)? else {
            unreachable!()
        };
        if len < self.pool_size {
            return Err(shape_err(format!(
                "{}: length {len} is shorter than pool size {}",
                self.name, self.pool_size
            )));
        }
        Ok(vec![batch, channels, (len - self.pool_size) / self.stride + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_window_maxima() {
        let mut pool = MaxPool1d::new("p", 2, 2).unwrap();
        let x = Tensor::new(vec![1, 1, 4], vec![1.0, 3.0, 2.0, 5.0]).unwrap();
        let y = pool.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
    }

    #[test]
    fn ties_pick_first_index() {
        let mut pool = MaxPool1d::new("p", 2, 2).unwrap();
        let x = Tensor::full(&[1, 2, 6], 7.0);
        let y = pool.forward(&x, Mode::Eval).unwrap();
        assert!(y.data().iter().all(|&v| v == 7.0));
        assert_eq!(pool.argmax().unwrap(), &[0, 2, 4, 6, 8, 10]);
    }

    #[test]
    fn odd_length_floors() {
        let pool = MaxPool1d::new("p", 2, 2).unwrap();
        assert_eq!(pool.output_shape(&[3, 4, 5]).unwrap(), vec![3, 4, 2]);
        assert!(pool.output_shape(&[1, 1, 1]).is_err());
    }

    #[test]
    fn backward_routes_to_winners() {
        let mut pool = MaxPool1d::new("p", 2, 2).unwrap();
        let x = Tensor::new(vec![1, 1, 4], vec![1.0, 3.0, 6.0, 5.0]).unwrap();
        pool.forward(&x, Mode::Eval).unwrap();
        let g = pool
            .backward(&Tensor::new(vec![1, 1, 2], vec![10.0, 20.0]).unwrap())
            .unwrap();
        assert_eq!(g.data(), &[0.0, 10.0, 20.0, 0.0]);
    }
}
