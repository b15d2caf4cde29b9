//! Flat parameter vectors.
//!
//! Every optimizer, quadratic model and network in this crate operates on a
//! single flat `ParamVector`, so averaging, interpolation and norm checks are
//! uniform across all of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat real-valued weight vector. Length is fixed for the lifetime of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        ParamVector(vec![0.0; n])
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        ParamVector(v)
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

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.0.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.0.len(),
            });
        }
        Ok(())
    }

    /// True iff every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) -> Result<()> {
        other.check_len(self.len())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.0 {
            *a *= alpha;
        }
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        other.check_len(self.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm_l2(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// max_i |self_i - other_i|
    pub fn dist_linf(&self, other: &ParamVector) -> Result<f64> {
        other.check_len(self.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn dist_l2(&self, other: &ParamVector) -> Result<f64> {
        other.check_len(self.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Elementwise sub: self - other.
    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        other.check_len(self.len())?;
        Ok(ParamVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Uniform elementwise mean of several vectors of equal length.
    pub fn mean(vectors: &[ParamVector]) -> Result<ParamVector> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::invalid("mean of zero vectors"))?;
        let n = first.len();
        let mut acc = vec![0.0; n];
        for v in vectors {
            v.check_len(n)?;
            for (a, b) in acc.iter_mut().zip(&v.0) {
                *a += b;
            }
        }
        let inv = 1.0 / vectors.len() as f64;
        for a in &mut acc {
            *a *= inv;
        }
        Ok(ParamVector(acc))
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}
