//! The update-rule contract shared by every learner.
//!
//! An update rule maps the current weights and a sample to an update vector
//! `Δ(w)`. Evaluation is pure: finite-difference probing calls
//! [`UpdateRule::evaluate`] at perturbed weights several times per step, so any
//! internal state (eligibility traces, second-moment accumulators) only
//! advances in [`UpdateRule::commit`], once per step, at the unperturbed
//! weights.

use crate::linalg::Jacobian;

pub trait UpdateRule {
    type Sample;

    /// Number of weights the rule updates.
    fn dim(&self) -> usize;

    /// `Δ(w)` for this sample. Must not change internal state.
    fn evaluate(&self, w: &[f64], sample: &Self::Sample) -> Vec<f64>;

    /// Advance internal state after the step taken at `w`.
    fn commit(&mut self, _w: &[f64], _sample: &Self::Sample) {}

    /// Clear per-episode state.
    fn reset(&mut self) {}

    /// Exact Jacobian `G = ∂Δ/∂w`, if the rule knows it.
    fn jacobian(&self, _w: &[f64], _sample: &Self::Sample) -> Option<Jacobian> {
        None
    }

    /// Exact `Gᵀ v`.
    fn jtp(&self, w: &[f64], sample: &Self::Sample, v: &[f64]) -> Option<Vec<f64>> {
        self.jacobian(w, sample).map(|g| g.tr_mul_vec(v))
    }

    /// Exact `G v`.
    fn jvp(&self, w: &[f64], sample: &Self::Sample, v: &[f64]) -> Option<Vec<f64>> {
        self.jacobian(w, sample).map(|g| g.mul_vec(v))
    }

    /// Exact diagonal of `G`.
    fn jacobian_diagonal(&self, w: &[f64], sample: &Self::Sample) -> Option<Vec<f64>> {
        self.jacobian(w, sample).map(|g| g.diagonal())
    }
}

type UpdateFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacobianFn = Box<dyn Fn(&[f64]) -> Jacobian + Send + Sync>;

/// A stateless rule built from closures. Handy for tests and for objectives
/// known only through their gradient.
pub struct FnRule {
    dim: usize,
    update: UpdateFn,
    jacobian: Option<JacobianFn>,
}

impl FnRule {
    pub fn new(dim: usize, update: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            update: Box::new(update),
            jacobian: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&[f64]) -> Jacobian + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Box::new(jacobian));
        self
    }
}

impl std::fmt::Debug for FnRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnRule")
            .field("dim", &self.dim)
            .field("has_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl UpdateRule for FnRule {
    type Sample = ();

    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, w: &[f64], _: &()) -> Vec<f64> {
        (self.update)(w)
    }

    fn jacobian(&self, w: &[f64], _: &()) -> Option<Jacobian> {
        self.jacobian.as_ref().map(|j| j(w))
    }
}
