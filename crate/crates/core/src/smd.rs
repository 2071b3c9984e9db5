//! Stochastic meta-descent with forgetting.
//!
//! Sign convention: `g` is the *negative* loss gradient, so the weight step
//! is `w ← w + α ∘ g` and the step sizes grow when successive steps agree.
//! `H` is the loss Hessian. For an update rule with Jacobian `G` the helpers
//! use `g = Δ` and `H = −G`; for TD this is not a true Hessian but it lets the
//! same code run on semi-gradient updates.
//!
//! All three variants share the exponential α update and its exponent clamp.

use crate::adagain::exponential_update;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, Matrix};
use crate::rule::UpdateRule;
use crate::vector::{apply_raw, StepSizeVector, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmdConfig {
    pub alpha0: f64,
    pub meta_step: f64,
    /// Forgetting rate; `1` disables the `(1 − β)` memory term.
    pub beta: f64,
}

impl Default for SmdConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.1,
            meta_step: 1e-3,
            beta: 0.1,
        }
    }
}

impl SmdConfig {
    pub fn new(alpha0: f64, meta_step: f64, beta: f64) -> Self {
        Self {
            alpha0,
            meta_step,
            beta,
        }
    }

    fn validate(&self) -> Result<()> {
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
        Ok(())
    }
}

fn diverged(step: u64, what: &str) -> Error {
    Error::Diverged {
        step,
        reason: format!("non-finite {what}"),
    }
}

/// `α ∘ exp(ᾱ α ∘ m)` for meta-gradient `m`.
fn grow(alpha: &[f64], m: &[f64], meta_step: f64, t: u64) -> Result<(Vec<f64>, u64)> {
    let (a, c) = exponential_update(alpha, alpha.iter().zip(m).map(|(a, m)| meta_step * (a * m)));
    if !all_finite(&a) {
        return Err(diverged(t, "step sizes"));
    }
    Ok((a, c))
}

fn negated(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| -x).collect()
}

macro_rules! accessors {
    () => {
        pub fn config(&self) -> &SmdConfig {
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

        pub fn steps(&self) -> u64 {
            self.t
        }

        pub fn clamp_events(&self) -> u64 {
            self.clamp_events
        }
    };
}

/// SMD with the full sensitivity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SmdQuadratic {
    config: SmdConfig,
    alpha: Vec<f64>,
    psi: Matrix,
    t: u64,
    clamp_events: u64,
}

impl SmdQuadratic {
    pub fn new(k: usize, config: SmdConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            alpha: vec![config.alpha0; k],
            psi: Matrix::zeros(k, k),
            t: 0,
            clamp_events: 0,
        })
    }

    accessors!();

    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    pub fn step(&mut self, w: &[f64], g: &[f64], hessian: &Matrix) -> Result<WeightVector> {
        check_dim(self.dim(), hessian.rows())?;
        check_dim(self.dim(), hessian.cols())?;
        let h_psi = hessian.mul_mat(&self.psi);
        self.step_inner(w, g, h_psi)
    }

    /// Step on an update rule with `g = Δ` and `H = −G`, then commit.
    pub fn step_rule<R: UpdateRule>(&mut self, rule: &mut R, w: &[f64], sample: &R::Sample) -> Result<WeightVector> {
        let g = rule.evaluate(w, sample);
        let jac = rule.jacobian(w, sample).ok_or(Error::MissingJacobian("a Jacobian"))?;
        let h_psi = jac.mul_mat(&self.psi).scale(-1.0);
        let next = self.step_inner(w, &g, h_psi)?;
        rule.commit(w, sample);
        Ok(next)
    }

    fn step_inner(&mut self, w: &[f64], g: &[f64], h_psi: Matrix) -> Result<WeightVector> {
        let k = self.dim();
        check_dim(k, w.len())?;
        check_dim(k, g.len())?;
        if !all_finite(g) {
            return Err(diverged(self.t, "gradient"));
        }
        let m = self.psi.tr_mul_vec(g);
        let (alpha, clamps) = grow(&self.alpha, &m, self.config.meta_step, self.t)?;
        let beta = self.config.beta;
        let psi = Matrix::from_fn(k, k, |r, c| {
            let v = (1.0 - beta) * self.psi.get(r, c) - beta * alpha[r] * h_psi.get(r, c);
            if r == c {
                v + beta * g[c]
            } else {
                v
            }
        });
        if !psi.is_finite() {
            return Err(diverged(self.t, "sensitivity matrix"));
        }
        let next = apply_raw(w, &alpha, g).map_err(|_| diverged(self.t, "weights"))?;
        self.alpha = alpha;
        self.psi = psi;
        self.clamp_events += clamps;
        self.t += 1;
        Ok(next)
    }
}

/// SMD with a diagonal sensitivity trace and the Hessian diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SmdLinear {
    config: SmdConfig,
    alpha: Vec<f64>,
    psi: Vec<f64>,
    t: u64,
    clamp_events: u64,
}

impl SmdLinear {
    pub fn new(k: usize, config: SmdConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            alpha: vec![config.alpha0; k],
            psi: vec![0.0; k],
            t: 0,
            clamp_events: 0,
        })
    }

    accessors!();

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn step(&mut self, w: &[f64], g: &[f64], hdiag: &[f64]) -> Result<WeightVector> {
        let k = self.dim();
        check_dim(k, w.len())?;
        check_dim(k, g.len())?;
        check_dim(k, hdiag.len())?;
        if !all_finite(g) {
            return Err(diverged(self.t, "gradient"));
        }
        let m: Vec<f64> = self.psi.iter().zip(g).map(|(p, g)| p * g).collect();
        let (alpha, clamps) = grow(&self.alpha, &m, self.config.meta_step, self.t)?;
        let beta = self.config.beta;
        let psi: Vec<f64> = (0..k)
            .map(|i| (1.0 - beta) * self.psi[i] - beta * alpha[i] * (hdiag[i] * self.psi[i]) + beta * g[i])
            .collect();
        if !all_finite(&psi) {
            return Err(diverged(self.t, "sensitivity trace"));
        }
        let next = apply_raw(w, &alpha, g).map_err(|_| diverged(self.t, "weights"))?;
        self.alpha = alpha;
        self.psi = psi;
        self.clamp_events += clamps;
        self.t += 1;
        Ok(next)
    }

    /// Step on an update rule with `g = Δ` and `ĥ = −diag(G)`, then commit.
    pub fn step_rule<R: UpdateRule>(&mut self, rule: &mut R, w: &[f64], sample: &R::Sample) -> Result<WeightVector> {
        let g = rule.evaluate(w, sample);
        let jd = rule
            .jacobian_diagonal(w, sample)
            .ok_or(Error::MissingJacobian("Jacobian diagonal"))?;
        let next = self.step(w, &g, &negated(jd))?;
        rule.commit(w, sample);
        Ok(next)
    }
}

/// SMD without forgetting, propagating `ψ̂` through a full Hessian-vector
/// product.
#[derive(Debug, Clone, PartialEq)]
pub struct SmdOriginal {
    config: SmdConfig,
    alpha: Vec<f64>,
    psi: Vec<f64>,
    t: u64,
    clamp_events: u64,
}

impl SmdOriginal {
    /// `config.beta` is ignored.
    pub fn new(k: usize, config: SmdConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            alpha: vec![config.alpha0; k],
            psi: vec![0.0; k],
            t: 0,
            clamp_events: 0,
        })
    }

    accessors!();

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn step(&mut self, w: &[f64], g: &[f64], hessian: &Matrix) -> Result<WeightVector> {
        check_dim(self.dim(), hessian.rows())?;
        check_dim(self.dim(), hessian.cols())?;
        let hv = hessian.mul_vec(&self.psi);
        self.step_inner(w, g, &hv)
    }

    /// Step on an update rule with `g = Δ` and `Hψ̂ = −Gψ̂`, then commit.
    pub fn step_rule<R: UpdateRule>(&mut self, rule: &mut R, w: &[f64], sample: &R::Sample) -> Result<WeightVector> {
        let g = rule.evaluate(w, sample);
        let gv = rule
            .jvp(w, sample, &self.psi)
            .ok_or(Error::MissingJacobian("Jacobian-vector products"))?;
        let next = self.step_inner(w, &g, &negated(gv))?;
        rule.commit(w, sample);
        Ok(next)
    }

    fn step_inner(&mut self, w: &[f64], g: &[f64], hv: &[f64]) -> Result<WeightVector> {
        let k = self.dim();
        check_dim(k, w.len())?;
        check_dim(k, g.len())?;
        if !all_finite(g) {
            return Err(diverged(self.t, "gradient"));
        }
        let m: Vec<f64> = self.psi.iter().zip(g).map(|(p, g)| p * g).collect();
        let (alpha, clamps) = grow(&self.alpha, &m, self.config.meta_step, self.t)?;
        let psi: Vec<f64> = (0..k).map(|i| self.psi[i] - alpha[i] * hv[i] + g[i]).collect();
        if !all_finite(&psi) {
            return Err(diverged(self.t, "sensitivity trace"));
        }
        let next = apply_raw(w, &alpha, g).map_err(|_| diverged(self.t, "weights"))?;
        self.alpha = alpha;
        self.psi = psi;
        self.clamp_events += clamps;
        self.t += 1;
        Ok(next)
    }
}
