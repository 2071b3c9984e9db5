//! AdaGain: meta-descent on a vector step size that minimises the squared
//! norm of the next update.
//!
//! Three learners share the same α recursion:
//!
//! * [`AdaGainQuadratic`] keeps the full sensitivity matrix `Ψ` (column `i` is
//!   `∂w/∂α_i`) and needs the whole Jacobian `G` each step.
//! * [`AdaGainLinear`] keeps only the diagonal of `Ψ`, needing `GᵀΔ` and the
//!   Jacobian diagonal. [`AdaGainLinear::step`] takes both from the rule,
//!   [`AdaGainLinear::step_fd`] estimates them with two extra evaluations.
//!
//! The meta-gradient for `α_t` is formed from a trace built with step sizes up
//! to `t − 1`.

use crate::error::{check_dim, Error, Result};
use crate::fd::{finite_difference_products, jacobian_finite_difference, DEFAULT_PROBE_RADIUS};
use crate::linalg::{all_finite, Jacobian, Matrix};
use crate::rule::UpdateRule;
use crate::vector::{apply_raw, StepSizeVector, WeightVector};

/// Bound on the per-coordinate exponent of the multiplicative α update.
pub const EXPONENT_LIMIT: f64 = 10.0;

/// Default floor for thresholded positivity.
pub const DEFAULT_ALPHA_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Positivity {
    /// `α ← α ∘ exp(−ᾱ g)` where `g` is the gradient with respect to `ln α`.
    #[default]
    Exponential,
    /// `α ← max(floor, α − ᾱ g)` where `g` is the gradient with respect to `α`.
    Thresholded { floor: f64 },
}

/// Which Jacobian product drives the meta-gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetaProduct {
    /// `GᵀΔ`, the gradient of `½‖Δ‖²`.
    #[default]
    Transposed,
    /// `GΔ`, the directional derivative along `Δ`. This is what the
    /// finite-difference estimate computes.
    Direct,
}

/// Multiplicative update with the exponent clamped to `±EXPONENT_LIMIT`.
/// Returns the new step sizes and how many coordinates were clamped.
pub(crate) fn exponential_update(alpha: &[f64], exponent: impl Iterator<Item = f64>) -> (Vec<f64>, u64) {
    let mut clamped = 0;
    let out = alpha
        .iter()
        .zip(exponent)
        .map(|(a, x)| {
            let x = if x.is_nan() {
                x
            } else if x.abs() > EXPONENT_LIMIT {
                clamped += 1;
                x.clamp(-EXPONENT_LIMIT, EXPONENT_LIMIT)
            } else {
                x
            };
            (a * x.exp()).clamp(f64::MIN_POSITIVE, f64::MAX)
        })
        .collect();
    if clamped > 0 {
        log::debug!("step-size exponent clamped on {clamped} coordinate(s)");
    }
    (out, clamped)
}

/// Apply one positivity-preserving meta step to `alpha`.
pub fn stepsize_positivity(
    alpha: &StepSizeVector,
    g: &[f64],
    meta_step: f64,
    mode: Positivity,
) -> StepSizeVector {
    positivity_raw(alpha, g, meta_step, mode).0
}

fn positivity_raw(
    alpha: &[f64],
    g: &[f64],
    meta_step: f64,
    mode: Positivity,
) -> (StepSizeVector, u64) {
    match mode {
        Positivity::Exponential => {
            let (a, c) = exponential_update(alpha, g.iter().map(|g| -meta_step * g));
            (StepSizeVector::from_raw(a), c)
        }
        Positivity::Thresholded { floor } => {
            let a = alpha
                .iter()
                .zip(g)
                .map(|(a, g)| (a - meta_step * g).max(floor).min(f64::MAX))
                .collect();
            (StepSizeVector::from_raw(a), 0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaGainConfig {
    pub alpha0: f64,
    /// Meta step size `ᾱ`.
    pub meta_step: f64,
    /// Forgetting rate `β` of the sensitivity trace.
    pub beta: f64,
    pub positivity: Positivity,
    pub meta_product: MetaProduct,
}

impl Default for AdaGainConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.1,
            meta_step: 1e-3,
            beta: 0.1,
            positivity: Positivity::Exponential,
            meta_product: MetaProduct::Transposed,
        }
    }
}

impl AdaGainConfig {
    pub fn new(alpha0: f64, meta_step: f64, beta: f64) -> Self {
        Self {
            alpha0,
            meta_step,
            beta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha0 must be > 0, got {}", self.alpha0)));
        }
        if !(self.meta_step >= 0.0 && self.meta_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "meta step must be >= 0, got {}",
                self.meta_step
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if let Positivity::Thresholded { floor } = self.positivity {
            if !(floor > 0.0 && floor.is_finite()) {
                return Err(Error::InvalidParameter(format!("alpha floor must be > 0, got {floor}")));
            }
        }
        Ok(())
    }

    /// New step sizes from the gradient of the meta-objective with respect to α.
    fn next_alpha(&self, alpha: &[f64], meta_grad: &[f64]) -> (StepSizeVector, u64) {
        match self.positivity {
            Positivity::Exponential => {
                let log_grad: Vec<f64> = alpha.iter().zip(meta_grad).map(|(a, g)| a * g).collect();
                positivity_raw(alpha, &log_grad, self.meta_step, self.positivity)
            }
            Positivity::Thresholded { .. } => {
                positivity_raw(alpha, meta_grad, self.meta_step, self.positivity)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub radius: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            radius: DEFAULT_PROBE_RADIUS,
        }
    }
}

fn diverged(step: u64, what: &str) -> Error {
    Error::Diverged {
        step,
        reason: format!("non-finite {what}"),
    }
}

/// AdaGain with a diagonal sensitivity trace `ψ̂`. `O(k)` per step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGainLinear {
    config: AdaGainConfig,
    alpha: Vec<f64>,
    psi: Vec<f64>,
    t: u64,
    clamp_events: u64,
}

impl AdaGainLinear {
    pub fn new(k: usize, config: AdaGainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            alpha: vec![config.alpha0; k],
            psi: vec![0.0; k],
            t: 0,
            clamp_events: 0,
        })
    }

    /// Start from explicit step sizes and trace.
    pub fn with_state(mut self, alpha: StepSizeVector, psi: Vec<f64>) -> Result<Self> {
        check_dim(self.alpha.len(), alpha.len())?;
        check_dim(self.alpha.len(), psi.len())?;
        self.alpha = alpha.into_inner();
        self.psi = psi;
        Ok(self)
    }

    pub fn config(&self) -> &AdaGainConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> StepSizeVector {
        StepSizeVector::from_raw(self.alpha.clone())
    }

    pub fn alpha_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// One step given the update `Δ`, the meta product (`GᵀΔ` or `GΔ`) and
    /// the Jacobian diagonal `ĵ`. State is left untouched on error.
    pub fn step_with_products(
        &mut self,
        w: &[f64],
        delta: &[f64],
        product: &[f64],
        jdiag: &[f64],
    ) -> Result<WeightVector> {
        let k = self.dim();
        check_dim(k, w.len())?;
        check_dim(k, delta.len())?;
        check_dim(k, product.len())?;
        check_dim(k, jdiag.len())?;
        if !all_finite(delta) {
            return Err(diverged(self.t, "update"));
        }
        let beta = self.config.beta;
        let meta_grad: Vec<f64> = self.psi.iter().zip(product).map(|(p, g)| p * g).collect();
        let (alpha, clamps) = self.config.next_alpha(&self.alpha, &meta_grad);
        if !all_finite(&alpha) {
            return Err(diverged(self.t, "step sizes"));
        }
        let psi: Vec<f64> = (0..k)
            .map(|i| (1.0 - beta) * self.psi[i] + beta * alpha[i] * (jdiag[i] * self.psi[i]) + beta * delta[i])
            .collect();
        if !all_finite(&psi) {
            return Err(diverged(self.t, "sensitivity trace"));
        }
        let next = apply_raw(w, &alpha, delta).map_err(|_| diverged(self.t, "weights"))?;
        self.alpha = alpha.into_inner();
        self.psi = psi;
        self.clamp_events += clamps;
        self.t += 1;
        Ok(next)
    }

    /// One step with the rule's exact Jacobian products, then commit.
    pub fn step<R: UpdateRule>(&mut self, rule: &mut R, w: &[f64], sample: &R::Sample) -> Result<WeightVector> {
        let delta = rule.evaluate(w, sample);
        let product = match self.config.meta_product {
            MetaProduct::Transposed => rule.jtp(w, sample, &delta),
            MetaProduct::Direct => rule.jvp(w, sample, &delta),
        }
        .ok_or(Error::MissingJacobian("Jacobian products"))?;
        let jdiag = rule
            .jacobian_diagonal(w, sample)
            .ok_or(Error::MissingJacobian("Jacobian diagonal"))?;
        let next = self.step_with_products(w, &delta, &product, &jdiag)?;
        rule.commit(w, sample);
        Ok(next)
    }

    /// One step with finite-difference products along `Δ`, then commit.
    pub fn step_fd<R: UpdateRule>(
        &mut self,
        rule: &mut R,
        w: &[f64],
        sample: &R::Sample,
        fd: &FdConfig,
    ) -> Result<WeightVector> {
        let delta = rule.evaluate(w, sample);
        if !all_finite(&delta) {
            return Err(diverged(self.t, "update"));
        }
        let p = finite_difference_products(rule, w, sample, &delta, fd.radius)?;
        let next = self.step_with_products(w, &delta, &p.directional, &p.diagonal)?;
        rule.commit(w, sample);
        Ok(next)
    }
}

/// AdaGain with the full sensitivity matrix. `O(k²)` memory and `O(k³)` per
/// step for a dense Jacobian, `O(k²)` for a rank-one one.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGainQuadratic {
    config: AdaGainConfig,
    alpha: Vec<f64>,
    psi: Matrix,
    t: u64,
    clamp_events: u64,
}

impl AdaGainQuadratic {
    pub fn new(k: usize, config: AdaGainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            alpha: vec![config.alpha0; k],
            psi: Matrix::zeros(k, k),
            t: 0,
            clamp_events: 0,
        })
    }

    pub fn with_state(mut self, alpha: StepSizeVector, psi: Matrix) -> Result<Self> {
        check_dim(self.alpha.len(), alpha.len())?;
        check_dim(self.alpha.len(), psi.rows())?;
        check_dim(self.alpha.len(), psi.cols())?;
        self.alpha = alpha.into_inner();
        self.psi = psi;
        Ok(self)
    }

    pub fn config(&self) -> &AdaGainConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> StepSizeVector {
        StepSizeVector::from_raw(self.alpha.clone())
    }

    pub fn alpha_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    pub fn step_with_jacobian(&mut self, w: &[f64], delta: &[f64], g: &Jacobian) -> Result<WeightVector> {
        let k = self.dim();
        check_dim(k, w.len())?;
        check_dim(k, delta.len())?;
        check_dim(k, g.dim())?;
        if !all_finite(delta) {
            return Err(diverged(self.t, "update"));
        }
        // right to left: Ψᵀ(GᵀΔ), never forming ΨᵀGᵀ
        let product = match self.config.meta_product {
            MetaProduct::Transposed => g.tr_mul_vec(delta),
            MetaProduct::Direct => g.mul_vec(delta),
        };
        let meta_grad = self.psi.tr_mul_vec(&product);
        let (alpha, clamps) = self.config.next_alpha(&self.alpha, &meta_grad);
        if !all_finite(&alpha) {
            return Err(diverged(self.t, "step sizes"));
        }
        let g_psi = g.mul_mat(&self.psi);
        let beta = self.config.beta;
        let psi = Matrix::from_fn(k, k, |r, c| {
            let v = (1.0 - beta) * self.psi.get(r, c) + beta * alpha[r] * g_psi.get(r, c);
            if r == c {
                v + beta * delta[c]
            } else {
                v
            }
        });
        if !psi.is_finite() {
            return Err(diverged(self.t, "sensitivity matrix"));
        }
        let next = apply_raw(w, &alpha, delta).map_err(|_| diverged(self.t, "weights"))?;
        self.alpha = alpha.into_inner();
        self.psi = psi;
        self.clamp_events += clamps;
        self.t += 1;
        Ok(next)
    }

    /// One step with the rule's exact Jacobian, then commit.
    pub fn step<R: UpdateRule>(&mut self, rule: &mut R, w: &[f64], sample: &R::Sample) -> Result<WeightVector> {
        let delta = rule.evaluate(w, sample);
        let g = rule
            .jacobian(w, sample)
            .ok_or(Error::MissingJacobian("a Jacobian"))?;
        let next = self.step_with_jacobian(w, &delta, &g)?;
        rule.commit(w, sample);
        Ok(next)
    }

    /// One step with a Jacobian built column by column from finite
    /// differences, then commit.
    pub fn step_fd<R: UpdateRule>(
        &mut self,
        rule: &mut R,
        w: &[f64],
        sample: &R::Sample,
        fd: &FdConfig,
    ) -> Result<WeightVector> {
        let delta = rule.evaluate(w, sample);
        let g = Jacobian::Dense(jacobian_finite_difference(rule, w, sample, fd.radius)?);
        let next = self.step_with_jacobian(w, &delta, &g)?;
        rule.commit(w, sample);
        Ok(next)
    }
}
