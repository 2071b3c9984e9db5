//! Weight, step-size and update vectors.

use std::ops::Deref;

use crate::error::{check_dim, Error, Result};
use crate::linalg::all_finite;

/// Model parameters `w`. All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !all_finite(&values) {
            return Err(Error::NonFinite("weights"));
        }
        Ok(Self(values))
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.0)
    }
}

impl Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-weight gains `α`. All entries strictly positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeVector(Vec<f64>);

impl StepSizeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "step sizes must be positive and finite, got {bad}"
            )));
        }
        Ok(Self(values))
    }

    pub fn filled(k: usize, alpha: f64) -> Result<Self> {
        Self::new(vec![alpha; k])
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

impl Deref for StepSizeVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Stochastic update direction `Δ` produced by a base learner.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateVector(Vec<f64>);

impl UpdateVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for UpdateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for UpdateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// `w + α ∘ Δ`.
pub fn apply_update(
    w: &WeightVector,
    alpha: &StepSizeVector,
    delta: &UpdateVector,
) -> Result<WeightVector> {
    check_dim(w.len(), alpha.len())?;
    check_dim(w.len(), delta.len())?;
    let next = w
        .iter()
        .zip(alpha.iter())
        .zip(delta.iter())
        .map(|((w, a), d)| w + a * d)
        .collect();
    WeightVector::new(next)
}

/// Same as [`apply_update`] on raw slices, used on the learners' hot path.
pub(crate) fn apply_raw(w: &[f64], alpha: &[f64], delta: &[f64]) -> Result<WeightVector> {
    check_dim(w.len(), alpha.len())?;
    check_dim(w.len(), delta.len())?;
    WeightVector::new(
        w.iter()
            .zip(alpha)
            .zip(delta)
            .map(|((w, a), d)| w + a * d)
            .collect(),
    )
}
