//! Scalar math and a minimal dense matrix.
//!
//! Every transcendental goes through `libm` rather than the platform libm so
//! that all results are bit-identical across targets; the reproducibility
//! contracts elsewhere in the crate depend on this.

use alloc::vec;
use alloc::vec::Vec;

pub const LN_2: f64 = core::f64::consts::LN_2;
const SQRT_2: f64 = core::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Exact GeLU, `x * Phi(x)` with the Gaussian CDF (not the tanh
/// approximation); finite-difference gradient checks need the exact form.
#[inline]
pub fn gelu(x: f64) -> f64 {
    x * 0.5 * (1.0 + erf(x / SQRT_2))
}

/// Derivative of the exact GeLU: `Phi(x) + x * phi(x)`.
#[inline]
pub fn gelu_prime(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + erf(x / SQRT_2));
    let pdf = INV_SQRT_2PI * exp(-0.5 * x * x);
    cdf + x * pdf
}

/// In-place stable softmax.
pub fn softmax(logits: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for &v in logits.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = exp(*v - max);
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

/// `x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * ln(x)
    }
}

/// Row-major dense matrix; just enough for the toy denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = self * x + b`.
    pub fn affine(&self, x: &[f64], b: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = b[r];
            for (w, xi) in row.iter().zip(x.iter()) {
                acc += w * xi;
            }
            *o = acc;
        }
    }

    /// `out += self^T * dy` (backprop through the affine map).
    pub fn add_t_matvec(&self, dy: &[f64], out: &mut [f64]) {
        debug_assert_eq!(dy.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = self.row(r);
            for (o, w) in out.iter_mut().zip(row.iter()) {
                *o += d * w;
            }
        }
    }

    /// `self += dy outer x` (weight gradient accumulation).
    pub fn add_outer(&mut self, dy: &[f64], x: &[f64]) {
        debug_assert_eq!(dy.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = self.row_mut(r);
            for (w, xi) in row.iter_mut().zip(x.iter()) {
                *w += d * xi;
            }
        }
    }
}
