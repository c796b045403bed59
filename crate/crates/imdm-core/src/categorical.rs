//! Categorical distributions over a finite support.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::rng::Rng;

const SUM_TOL: f64 = 1e-9;

/// Probability vector; entries non-negative, summing to 1 within `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("categorical needs a non-empty support"));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(invalid(format!("probability at index {i} is {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(invalid(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(Categorical { probs })
    }

    /// Point mass on `index`.
    pub fn delta(support: usize, index: usize) -> Result<Self> {
        if index >= support {
            return Err(invalid(format!("delta index {index} outside support {support}")));
        }
        let mut probs = vec![0.0; support];
        probs[index] = 1.0;
        Ok(Categorical { probs })
    }

    pub fn uniform(support: usize) -> Result<Self> {
        if support == 0 {
            return Err(invalid("uniform needs a non-empty support"));
        }
        Ok(Categorical {
            probs: vec![1.0 / support as f64; support],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    /// Inverse-CDF sample; walks the support in index order.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}
