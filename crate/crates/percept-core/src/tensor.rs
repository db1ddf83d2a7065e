//! Dense tensor value type and shape algebra.
//!
//! Storage is a flat row-major `Vec<f32>`; reductions (matrix products, sums)
//! accumulate in f64 before rounding back to f32. Ranks up to 4 are used by
//! the layer stack: `[batch, channel, height, width]` for images and
//! `[batch, time, features]` for sequences.

use crate::rng::Prng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("invalid shape {dims:?}: every extent must be at least 1")]
    InvalidShape { dims: Vec<usize> },
    #[error("shape {shape:?} implies {expected} elements, got {actual}")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("expected rank-{expected} tensor, got shape {shape:?}")]
    RankMismatch { expected: usize, shape: Vec<usize> },
    #[error("inner dimensions disagree: {left:?} x {right:?}")]
    MatmulDims { left: Vec<usize>, right: Vec<usize> },
    #[error("empty tensor has no argmax")]
    EmptyArgmax,
    #[error("uniform range requires lo < hi, got [{lo}, {hi})")]
    BadUniformRange { lo: f32, hi: f32 },
}

/// Ordered list of positive extents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self, TensorError> {
        let dims = dims.into();
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(TensorError::InvalidShape { dims });
        }
        Ok(Shape { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Total element count: the product of all extents.
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Dense row-major f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    pub fn filled(dims: impl Into<Vec<usize>>, value: f32) -> Result<Self, TensorError> {
        let shape = Shape::new(dims)?;
        let n = shape.numel();
        Ok(Tensor {
            shape,
            data: vec![value; n],
        })
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self, TensorError> {
        Self::filled(dims, 0.0)
    }

    pub fn from_vec(dims: impl Into<Vec<usize>>, data: Vec<f32>) -> Result<Self, TensorError> {
        let shape = Shape::new(dims)?;
        if shape.numel() != data.len() {
            return Err(TensorError::DataLength {
                expected: shape.numel(),
                actual: data.len(),
                shape: shape.dims().to_vec(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshape(&self, dims: impl Into<Vec<usize>>) -> Result<Tensor, TensorError> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.data.len() {
            return Err(TensorError::DataLength {
                expected: shape.numel(),
                actual: self.data.len(),
                shape: shape.dims().to_vec(),
            });
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    /// Elementwise map; shape preserved.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise combination of two same-shaped tensors.
    pub fn zip(&self, other: &Tensor, f: impl Fn(f32, f32) -> f32) -> Result<Tensor, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                left: self.dims().to_vec(),
                right: other.dims().to_vec(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.zip(other, |a, b| a + b)
    }

    pub fn scale(&self, k: f32) -> Tensor {
        self.map(|x| x * k)
    }

    /// Standard matrix product of two rank-2 tensors, f64 accumulation.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (m, k) = self.as_rank2()?;
        let (k2, n) = other.as_rank2()?;
        if k != k2 {
            return Err(TensorError::MatmulDims {
                left: self.dims().to_vec(),
                right: other.dims().to_vec(),
            });
        }
        let mut out = vec![0.0f32; m * n];
        let mut acc = vec![0.0f64; n];
        for i in 0..m {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let a_row = &self.data[i * k..(i + 1) * k];
            for (kk, &a_ik) in a_row.iter().enumerate() {
                let av = a_ik as f64;
                let b_row = &other.data[kk * n..(kk + 1) * n];
                for (a, &b) in acc.iter_mut().zip(b_row.iter()) {
                    *a += av * b as f64;
                }
            }
            for (o, &a) in out[i * n..(i + 1) * n].iter_mut().zip(acc.iter()) {
                *o = a as f32;
            }
        }
        Ok(Tensor {
            shape: Shape::new([m, n]).expect("positive dims"),
            data: out,
        })
    }

    pub(crate) fn as_rank2(&self) -> Result<(usize, usize), TensorError> {
        match self.dims() {
            &[r, c] => Ok((r, c)),
            _ => Err(TensorError::RankMismatch {
                expected: 2,
                shape: self.dims().to_vec(),
            }),
        }
    }

    /// Transposed copy of a rank-2 tensor.
    pub fn transpose2(&self) -> Result<Tensor, TensorError> {
        let (rows, cols) = self.as_rank2()?;
        let mut data = vec![0.0f32; self.data.len()];
        for r in 0..rows {
            for c in 0..cols {
                data[c * rows + r] = self.data[r * cols + c];
            }
        }
        Ok(Tensor {
            shape: Shape::new([cols, rows]).expect("positive dims"),
            data,
        })
    }

    /// Index of the maximum of a rank-1 tensor; ties break to the lowest index.
    pub fn argmax(&self) -> Result<usize, TensorError> {
        if self.rank() != 1 {
            return Err(TensorError::RankMismatch {
                expected: 1,
                shape: self.dims().to_vec(),
            });
        }
        argmax_slice(&self.data).ok_or(TensorError::EmptyArgmax)
    }

    /// Row-wise argmax of a rank-2 tensor.
    pub fn argmax_rows(&self) -> Result<Vec<usize>, TensorError> {
        let (rows, cols) = self.as_rank2()?;
        Ok((0..rows)
            .map(|r| argmax_slice(&self.data[r * cols..(r + 1) * cols]).expect("cols >= 1"))
            .collect())
    }

    /// Contiguous view of row `r` of a rank-2 tensor.
    pub fn row(&self, r: usize) -> &[f32] {
        let cols = *self.dims().last().expect("rank >= 1");
        &self.data[r * cols..(r + 1) * cols]
    }

    /// Sum of all elements, f64 accumulation.
    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&x| x as f64).sum()
    }

    /// New tensor assembled from the given first-axis slices, in order.
    pub fn gather_first_axis(&self, indices: &[usize]) -> Result<Tensor, TensorError> {
        if indices.is_empty() {
            return Err(TensorError::InvalidShape { dims: vec![0] });
        }
        let item = self.len() / self.dims()[0];
        let mut dims = self.dims().to_vec();
        dims[0] = indices.len();
        let mut data = Vec::with_capacity(indices.len() * item);
        for &i in indices {
            data.extend_from_slice(&self.data[i * item..(i + 1) * item]);
        }
        Tensor::from_vec(dims, data)
    }

    /// I.i.d. uniform samples in [lo, hi), deterministic in the generator state.
    pub fn uniform(
        prng: &mut Prng,
        dims: impl Into<Vec<usize>>,
        lo: f32,
        hi: f32,
    ) -> Result<Tensor, TensorError> {
        if !(lo < hi) {
            return Err(TensorError::BadUniformRange { lo, hi });
        }
        let shape = Shape::new(dims)?;
        let n = shape.numel();
        Ok(Tensor {
            shape,
            data: (0..n).map(|_| prng.uniform(lo, hi)).collect(),
        })
    }
}

fn argmax_slice(xs: &[f32]) -> Option<usize> {
    if xs.is_empty() {
        return None;
    }
    let mut best = 0usize;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    Some(best)
}
