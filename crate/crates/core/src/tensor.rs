//! Dense row-major `f64` tensors.
//!
//! Activations use `(batch, channels, length)` for convolutional stages and
//! `(batch, time, features)` for recurrent stages. Operations return new
//! tensors; the only in-place mutation is parameter updates inside the crate.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(shape_err(format!("invalid shape {shape:?}")));
        }
        if numel(&shape) != data.len() {
            return Err(shape_err(format!(
                "shape {shape:?} needs {} elements, got {}",
                numel(&shape),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        assert!(
            !shape.is_empty() && !shape.contains(&0),
            "invalid shape {shape:?}"
        );
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        }
    }

    /// Build a 2-D tensor from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(shape_err("ragged rows"));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Random normal entries, mostly for tests and fixtures.
    pub fn randn(shape: &[usize], scale: f64, rng: &mut SeededRng) -> Self {
        let mut t = Self::zeros(shape);
        for v in &mut t.data {
            *v = scale * rng.normal();
        }
        t
    }

    /// Uniform entries in `[lo, hi)`.
    pub fn rand_uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut SeededRng) -> Self {
        let mut t = Self::zeros(shape);
        for v in &mut t.data {
            *v = rng.uniform(lo, hi);
        }
        t
    }

    /// Glorot (Xavier) uniform initialization: entries drawn from
    /// `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot_uniform(
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::Config(format!(
                "glorot init needs positive fans, got fan_in={fan_in} fan_out={fan_out}"
            )));
        }
        if shape.is_empty() || shape.contains(&0) {
            return Err(shape_err(format!("invalid shape {shape:?}")));
        }
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Ok(Self::rand_uniform(shape, -limit, limit, rng))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        index.iter().zip(&self.shape).fold(0, |acc, (&i, &d)| {
            assert!(i < d, "index {index:?} out of bounds for {:?}", self.shape);
            acc * d + i
        })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape.to_vec(), self.data.clone())
    }

    fn require_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(shape_err(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// `c = a · b` for 2-D tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (&[m, k], &[k2, n]) = (self.shape.as_slice(), other.shape.as_slice()) else {
            return Err(shape_err(format!(
                "matmul needs 2-D operands, got {:?} and {:?}",
                self.shape, other.shape
            )));
        };
        if k != k2 {
            return Err(shape_err(format!(
                "matmul inner dimensions differ: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            MatRef::new(&self.data, m, k),
            MatRef::new(&other.data, k, n),
            &mut out,
            0.0,
        );
        Tensor::new(vec![m, n], out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.require_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        self.map(|v| alpha * v)
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map(sigmoid)
    }

    pub fn tanh(&self) -> Tensor {
        self.map(f64::tanh)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.require_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Numeric(format!("{what} contains NaN or infinity")))
        }
    }

    /// Swap the last two axes of a 3-D tensor: `(b, x, y) -> (b, y, x)`.
    pub fn swap_last_axes(&self) -> Result<Tensor> {
        let &[b, x, y] = self.shape.as_slice() else {
            return Err(shape_err(format!(
                "swap_last_axes needs a 3-D tensor, got {:?}",
                self.shape
            )));
        };
        let mut out = vec![0.0; self.data.len()];
        for n in 0..b {
            let src = &self.data[n * x * y..(n + 1) * x * y];
            let dst = &mut out[n * x * y..(n + 1) * x * y];
            for i in 0..x {
                for j in 0..y {
                    dst[j * x + i] = src[i * y + j];
                }
            }
        }
        Tensor::new(vec![b, y, x], out)
    }

    /// Rows `start..start + count` along the first axis.
    pub fn slice_rows(&self, start: usize, count: usize) -> Result<Tensor> {
        let rows = self.shape[0];
        if count == 0 || start + count > rows {
            return Err(shape_err(format!(
                "rows {start}..{} out of range for {rows}",
                start + count
            )));
        }
        let stride = self.data.len() / rows;
        let mut shape = self.shape.clone();
        shape[0] = count;
        Tensor::new(
            shape,
            self.data[start * stride..(start + count) * stride].to_vec(),
        )
    }

    /// Gather rows along the first axis.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Tensor> {
        let rows = self.shape[0];
        let stride = self.data.len() / rows;
        let mut data = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            if i >= rows {
                return Err(shape_err(format!("row {i} out of range for {rows}")));
            }
            data.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Tensor::new(shape, data)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A strided read-only matrix view used by the GEMM kernels.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    row_stride: isize,
    col_stride: isize,
}

impl<'a> MatRef<'a> {
    /// Row-major `rows x cols` view of the start of `data`.
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self::strided(data, rows, cols, cols, 1)
    }

    pub fn strided(
        data: &'a [f64],
        rows: usize,
        cols: usize,
        row_stride: usize,
        col_stride: usize,
    ) -> Self {
        if rows > 0 && cols > 0 {
            let last = (rows - 1) * row_stride + (cols - 1) * col_stride;
            assert!(last < data.len(), "matrix view exceeds its buffer");
        }
        Self {
            data,
            rows,
            cols,
            row_stride: row_stride as isize,
            col_stride: col_stride as isize,
        }
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }
}

/// `c = a · b + beta · c`, with `c` a dense row-major `a.rows x b.cols`
/// buffer.
pub(crate) fn gemm(a: MatRef<'_>, b: MatRef<'_>, c: &mut [f64], beta: f64) {
    gemm_into(a, b, c, b.cols, beta);
}

/// Like [`gemm`] but `c` rows are `ldc` apart, which lets callers write into
/// a column block of a wider matrix.
pub(crate) fn gemm_into(a: MatRef<'_>, b: MatRef<'_>, c: &mut [f64], ldc: usize, beta: f64) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension mismatch");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    assert!((m - 1) * ldc + n <= c.len(), "gemm output buffer too small");
    if k == 0 {
        for i in 0..m {
            for v in &mut c[i * ldc..i * ldc + n] {
                *v *= beta;
            }
        }
        return;
    }
    // SAFETY: the views were bounds-checked on construction and the output
    // extent is checked above; the three buffers come from distinct borrows.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}
