//! LMS and off-policy linear TD(λ) as update rules.
//!
//! TD uses the accumulating importance-sampled trace `e ← ρ(γ λ e + x)`.
//! With `d = γ' x' − x` the Jacobian of `Δ = δ e` is the rank-one `G = e dᵀ`,
//! so every product AdaGain needs costs `O(k)`. LMS is the `γ = 0` case,
//! `G = −x xᵀ`.

use crate::adagain::{AdaGainLinear, AdaGainQuadratic, MetaProduct};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, dot, hadamard, Jacobian};
use crate::rule::UpdateRule;
use crate::vector::{UpdateVector, WeightVector};

/// One transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TdSample {
    pub x: Vec<f64>,
    pub x_next: Vec<f64>,
    pub reward: f64,
    /// Discount `γ_t` used to decay the trace.
    pub gamma: f64,
    /// Discount `γ_{t+1}` used in the TD error.
    pub gamma_next: f64,
    /// Importance ratio `ρ_t`.
    pub rho: f64,
}

impl TdSample {
    /// On-policy transition with a constant discount.
    pub fn on_policy(x: Vec<f64>, x_next: Vec<f64>, reward: f64, gamma: f64) -> Self {
        Self {
            x,
            x_next,
            reward,
            gamma,
            gamma_next: gamma,
            rho: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.x.len(), self.x_next.len())?;
        if !all_finite(&self.x) || !all_finite(&self.x_next) || !self.reward.is_finite() {
            return Err(Error::NonFinite("sample"));
        }
        for (name, g) in [("gamma", self.gamma), ("gamma_next", self.gamma_next)] {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {g}")));
            }
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be >= 0, got {}", self.rho)));
        }
        Ok(())
    }

    /// `d = γ' x' − x`
    pub fn direction(&self) -> Vec<f64> {
        self.x_next
            .iter()
            .zip(&self.x)
            .map(|(xn, x)| self.gamma_next * xn - x)
            .collect()
    }
}

/// `δ = r + γ' x'ᵀw − xᵀw`
pub fn td_error(w: &[f64], s: &TdSample) -> f64 {
    s.reward + s.gamma_next * dot(&s.x_next, w) - dot(&s.x, w)
}

/// Off-policy TD(λ) with an accumulating trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TdLambda {
    lambda: f64,
    trace: Vec<f64>,
}

impl TdLambda {
    pub fn new(k: usize, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        Ok(Self {
            lambda,
            trace: vec![0.0; k],
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Trace committed after the previous step.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    /// The trace this sample would produce, without committing it.
    pub fn next_trace(&self, s: &TdSample) -> Vec<f64> {
        self.trace
            .iter()
            .zip(&s.x)
            .map(|(e, x)| s.rho * (s.gamma * self.lambda * e + x))
            .collect()
    }

    /// `(Δ, δ)` without touching the trace.
    pub fn probe(&self, w: &[f64], s: &TdSample) -> (Vec<f64>, f64) {
        let delta = td_error(w, s);
        let e = self.next_trace(s);
        (e.iter().map(|e| delta * e).collect(), delta)
    }
}

impl UpdateRule for TdLambda {
    type Sample = TdSample;

    fn dim(&self) -> usize {
        self.trace.len()
    }

    fn evaluate(&self, w: &[f64], s: &TdSample) -> Vec<f64> {
        self.probe(w, s).0
    }

    fn commit(&mut self, _w: &[f64], s: &TdSample) {
        self.trace = self.next_trace(s);
    }

    fn reset(&mut self) {
        self.trace.iter_mut().for_each(|e| *e = 0.0);
    }

    fn jacobian(&self, _w: &[f64], s: &TdSample) -> Option<Jacobian> {
        Some(Jacobian::RankOne {
            left: self.next_trace(s),
            right: s.direction(),
        })
    }
}

/// Advance the trace and return `(Δ, δ)`.
pub fn td_update(state: &mut TdLambda, w: &[f64], s: &TdSample) -> Result<(UpdateVector, f64)> {
    check_dim(state.dim(), w.len())?;
    check_dim(state.dim(), s.x.len())?;
    s.validate()?;
    let (delta, err) = state.probe(w, s);
    state.commit(w, s);
    Ok((UpdateVector::new(delta), err))
}

/// `(GᵀΔ, ĵ)` for `G = e dᵀ`, `d = γ' x' − x`, in `O(k)`.
pub fn td_jacobian_products(
    e: &[f64],
    x: &[f64],
    x_next: &[f64],
    gamma_next: f64,
    delta: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let d: Vec<f64> = x_next.iter().zip(x).map(|(xn, x)| gamma_next * xn - x).collect();
    let s = dot(e, delta);
    let gtd = d.iter().map(|d| s * d).collect();
    (gtd, hadamard(e, &d))
}

/// Closed-form linear AdaGain on TD. Returns the new weights and the TD error.
///
/// With [`MetaProduct::Transposed`] the meta product is `(eᵀΔ) d`; with
/// [`MetaProduct::Direct`] it is `(dᵀΔ) e`.
pub fn adagain_td_linear_step(
    learner: &mut AdaGainLinear,
    td: &mut TdLambda,
    w: &[f64],
    s: &TdSample,
) -> Result<(WeightVector, f64)> {
    check_dim(td.dim(), w.len())?;
    s.validate()?;
    let (delta, err) = td.probe(w, s);
    let e = td.next_trace(s);
    let d = s.direction();
    let product = match learner.config().meta_product {
        MetaProduct::Transposed => {
            let c = dot(&e, &delta);
            d.iter().map(|d| c * d).collect::<Vec<_>>()
        }
        MetaProduct::Direct => {
            let c = dot(&d, &delta);
            e.iter().map(|e| c * e).collect()
        }
    };
    let jdiag = hadamard(&e, &d);
    let next = learner.step_with_products(w, &delta, &product, &jdiag)?;
    td.commit(w, s);
    Ok((next, err))
}

/// Quadratic AdaGain on TD using the rank-one Jacobian, without forming `G`.
pub fn adagain_td_quadratic_step(
    learner: &mut AdaGainQuadratic,
    td: &mut TdLambda,
    w: &[f64],
    s: &TdSample,
) -> Result<(WeightVector, f64)> {
    check_dim(td.dim(), w.len())?;
    s.validate()?;
    let (delta, err) = td.probe(w, s);
    let g = td.jacobian(w, s).expect("TD always has a Jacobian");
    let next = learner.step_with_jacobian(w, &delta, &g)?;
    td.commit(w, s);
    Ok((next, err))
}

/// One regression example.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    pub x: Vec<f64>,
    pub target: f64,
}

/// `(Δ, δ)` with `δ = T − wᵀx` and `Δ = δ x`.
pub fn lms_update(w: &[f64], x: &[f64], target: f64) -> Result<(UpdateVector, f64)> {
    check_dim(w.len(), x.len())?;
    let delta = target - dot(w, x);
    Ok((UpdateVector::new(x.iter().map(|x| delta * x).collect()), delta))
}

/// The stateless LMS rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lms {
    k: usize,
}

impl Lms {
    pub fn new(k: usize) -> Self {
        Self { k }
    }
}

impl UpdateRule for Lms {
    type Sample = RegressionSample;

    fn dim(&self) -> usize {
        self.k
    }

    fn evaluate(&self, w: &[f64], s: &RegressionSample) -> Vec<f64> {
        let delta = s.target - dot(w, &s.x);
        s.x.iter().map(|x| delta * x).collect()
    }

    fn jacobian(&self, _w: &[f64], s: &RegressionSample) -> Option<Jacobian> {
        Some(Jacobian::RankOne {
            left: s.x.clone(),
            right: s.x.iter().map(|x| -x).collect(),
        })
    }
}
