//! Weight vectors on the probability simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-sum invariant.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A vector of nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights(Vec<f64>);

impl Weights {
    /// Validates `values`; they must already sum to one within [`WEIGHT_SUM_TOL`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if let Some(bad) = values.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("entry {bad} is negative or not finite")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("entries sum to {sum}, not 1")));
        }
        Ok(Self(values))
    }

    /// Rescales arbitrary nonnegative entries onto the simplex.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidWeights(format!("cannot normalize, sum is {sum}")));
        }
        if values.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("negative or non-finite entry".into()));
        }
        Self::new(values.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform weights need at least one entry");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn require_positive(&self) -> Result<()> {
        match self.0.iter().position(|w| *w <= 0.0) {
            Some(i) => Err(Error::InvalidWeights(format!("weight {i} must be strictly positive"))),
            None => Ok(()),
        }
    }

    pub fn require_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::InvalidWeights(format!(
                "{} weights given for {n} samples",
                self.0.len()
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Weights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
