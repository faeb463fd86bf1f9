//! Row-major `f32` tensors and the handful of dense kernels the model needs.
//!
//! Storage is 32-bit; every reduction accumulates in 64-bit.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape {
                op: "tensor",
                expected: vec![expected],
                actual: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f32>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of rows of a matrix (first dimension).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Row length of a matrix; the whole length for a vector.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 0,
            1 => self.shape[0],
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let cols = self.cols();
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn expect_shape(&self, op: &'static str, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Shape {
                op,
                expected: shape.to_vec(),
                actual: self.shape.clone(),
            });
        }
        Ok(())
    }
}

pub(crate) fn expect_len(op: &'static str, xs: &[f32], len: usize) -> Result<()> {
    if xs.len() != len {
        return Err(Error::Shape {
            op,
            expected: vec![len],
            actual: vec![xs.len()],
        });
    }
    Ok(())
}

/// `out = w · x + b` for a `rows × x.len()` matrix, accumulated in `f64`.
pub(crate) fn matvec_f64(w: &[f32], x: &[f32], b: &[f32], out: &mut [f64]) {
    let cols = x.len();
    for (r, (o, bias)) in out.iter_mut().zip(b).enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = *bias as f64;
        for (wi, xi) in row.iter().zip(x) {
            acc += *wi as f64 * *xi as f64;
        }
        *o = acc;
    }
}

/// `dx += wᵀ · dy` for a `dy.len() × dx.len()` matrix.
pub(crate) fn matvec_t_acc(w: &[f32], dy: &[f64], dx: &mut [f64]) {
    let cols = dx.len();
    for (r, g) in dy.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (d, wi) in dx.iter_mut().zip(row) {
            *d += g * *wi as f64;
        }
    }
}

/// `dw += dy ⊗ x`.
pub(crate) fn outer_acc(dy: &[f64], x: &[f32], dw: &mut [f64]) {
    let cols = x.len();
    for (r, g) in dy.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (d, xi) in row.iter_mut().zip(x) {
            *d += g * *xi as f64;
        }
    }
}

/// Log-softmax with max subtraction, computed in `f64`.
pub fn log_softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().fold(f32::NEG_INFINITY, |m, &x| m.max(x)) as f64;
    let sum: f64 = logits.iter().map(|&x| libm::exp(x as f64 - max)).sum();
    let log_z = max + libm::log(sum);
    logits.iter().map(|&x| x as f64 - log_z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_length() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            Tensor::new(vec![2, 3], vec![0.0; 5]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn rows_and_cols() {
        let t = Tensor::zeros(&[4, 3]);
        assert_eq!((t.rows(), t.cols()), (4, 3));
        assert_eq!(t.row(2).len(), 3);
    }

    #[test]
    fn log_softmax_is_stable() {
        let lp = log_softmax(&[1000.0, 0.0]);
        assert!(lp[0].abs() < 1e-12);
        assert!((lp[1] + 1000.0).abs() < 1e-9);
    }
}
