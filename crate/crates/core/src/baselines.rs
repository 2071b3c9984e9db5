//! Quasi-second-order optimizers and first-order meta-descent baselines.
//!
//! The accumulator optimizers share one state type ([`Accumulator`]) that
//! turns a gradient into a preconditioned descent direction. It can be used
//! standalone ([`Accumulator::step`]) or wrapped around any update rule
//! ([`Preconditioned`]) so that AdaGain can adapt step sizes on top of it.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, dot, hadamard, Jacobian};
use crate::rule::UpdateRule;
use crate::vector::{StepSizeVector, UpdateVector, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccumulatorKind {
    Sgd,
    AdaGrad,
    RmsProp,
    AdaDelta,
    Adam,
    AmsGrad,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccumulatorConfig {
    pub kind: AccumulatorKind,
    /// Scalar gain `η`.
    pub eta: f64,
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Decay of the RMSProp / AdaDelta running averages.
    pub rho: f64,
}

impl AccumulatorConfig {
    pub fn new(kind: AccumulatorKind, eta: f64) -> Self {
        Self {
            kind,
            eta,
            epsilon: 1e-8,
            beta1: 0.9,
            beta2: 0.999,
            rho: 0.9,
        }
    }

    fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must lie in [0, 1), got {v}")))
            }
        };
        unit("beta1", self.beta1)?;
        unit("beta2", self.beta2)?;
        unit("rho", self.rho)?;
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Running statistics of the accumulator optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    config: AccumulatorConfig,
    /// First moment (Adam, AMSGrad).
    m: Vec<f64>,
    /// Second moment; the summed squares for AdaGrad.
    v: Vec<f64>,
    /// Running maximum of `v` (AMSGrad).
    v_max: Vec<f64>,
    /// Running average of squared updates (AdaDelta).
    u: Vec<f64>,
    t: u64,
}

/// The state an accumulator would move to after seeing one gradient.
struct Preview {
    direction: Vec<f64>,
    scale: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    v_max: Vec<f64>,
    u: Vec<f64>,
}

impl Accumulator {
    pub fn new(config: AccumulatorConfig, k: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            m: vec![0.0; k],
            v: vec![0.0; k],
            v_max: vec![0.0; k],
            u: vec![0.0; k],
            t: 0,
        })
    }

    pub fn config(&self) -> &AccumulatorConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn max_second_moment(&self) -> &[f64] {
        &self.v_max
    }

    fn preview(&self, g: &[f64]) -> Preview {
        let c = &self.config;
        let k = g.len();
        let t = self.t + 1;
        let mut direction = vec![0.0; k];
        let mut scale = vec![1.0; k];
        let mut m = self.m.clone();
        let mut v = self.v.clone();
        let mut v_max = self.v_max.clone();
        let mut u = self.u.clone();
        match c.kind {
            AccumulatorKind::Sgd => {
                for i in 0..k {
                    direction[i] = -g[i];
                }
            }
            AccumulatorKind::AdaGrad => {
                for i in 0..k {
                    v[i] += g[i] * g[i];
                    scale[i] = 1.0 / (v[i].sqrt() + c.epsilon);
                    direction[i] = -g[i] * scale[i];
                }
            }
            AccumulatorKind::RmsProp => {
                for i in 0..k {
                    v[i] = c.rho * v[i] + (1.0 - c.rho) * g[i] * g[i];
                    scale[i] = 1.0 / (v[i].sqrt() + c.epsilon);
                    direction[i] = -g[i] * scale[i];
                }
            }
            AccumulatorKind::AdaDelta => {
                for i in 0..k {
                    v[i] = c.rho * v[i] + (1.0 - c.rho) * g[i] * g[i];
                    scale[i] = (u[i] + c.epsilon).sqrt() / (v[i] + c.epsilon).sqrt();
                    direction[i] = -g[i] * scale[i];
                    u[i] = c.rho * u[i] + (1.0 - c.rho) * direction[i] * direction[i];
                }
            }
            AccumulatorKind::Adam => {
                let bc1 = 1.0 - c.beta1.powi(t.min(i32::MAX as u64) as i32);
                let bc2 = 1.0 - c.beta2.powi(t.min(i32::MAX as u64) as i32);
                for i in 0..k {
                    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                    let denom = (v[i] / bc2).sqrt() + c.epsilon;
                    scale[i] = (1.0 - c.beta1) / bc1 / denom;
                    direction[i] = -(m[i] / bc1) / denom;
                }
            }
            AccumulatorKind::AmsGrad => {
                let bc1 = 1.0 - c.beta1.powi(t.min(i32::MAX as u64) as i32);
                for i in 0..k {
                    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                    v_max[i] = v_max[i].max(v[i]);
                    let denom = v_max[i].sqrt() + c.epsilon;
                    scale[i] = (1.0 - c.beta1) / bc1 / denom;
                    direction[i] = -(m[i] / bc1) / denom;
                }
            }
        }
        Preview {
            direction,
            scale,
            m,
            v,
            v_max,
            u,
        }
    }

    /// Descent direction `d` for gradient `g` (the step is `w + η·d`),
    /// without advancing the statistics.
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        self.preview(g).direction
    }

    /// Per-coordinate derivative of the direction with respect to `-g`,
    /// holding the running statistics fixed at their post-update values.
    pub fn local_scale(&self, g: &[f64]) -> Vec<f64> {
        self.preview(g).scale
    }

    /// Advance the running statistics with gradient `g`.
    pub fn commit_gradient(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.dim(), g.len())?;
        if !all_finite(g) {
            return Err(Error::NonFinite("gradient"));
        }
        let p = self.preview(g);
        self.m = p.m;
        self.v = p.v;
        self.v_max = p.v_max;
        self.u = p.u;
        self.t += 1;
        Ok(())
    }

    /// One optimizer step on weights `w` with stochastic gradient `g`.
    /// A non-finite gradient leaves the state untouched.
    pub fn step(&mut self, w: &WeightVector, g: &UpdateVector) -> Result<WeightVector> {
        check_dim(self.dim(), w.len())?;
        check_dim(self.dim(), g.len())?;
        if !all_finite(g) {
            return Err(Error::NonFinite("gradient"));
        }
        let d = self.direction(g);
        let next = WeightVector::new(
            w.iter()
                .zip(&d)
                .map(|(w, d)| w + self.config.eta * d)
                .collect(),
        )?;
        self.commit_gradient(g)?;
        Ok(next)
    }

    /// Current per-coordinate effective step size `η · scale`, evaluated at a
    /// zero gradient (i.e. from the statistics alone).
    pub fn effective_step_sizes(&self) -> Vec<f64> {
        let c = &self.config;
        (0..self.dim())
            .map(|i| {
                let s = match c.kind {
                    AccumulatorKind::Sgd => 1.0,
                    AccumulatorKind::AdaGrad | AccumulatorKind::RmsProp => {
                        1.0 / (self.v[i].sqrt() + c.epsilon)
                    }
                    AccumulatorKind::AdaDelta => {
                        (self.u[i] + c.epsilon).sqrt() / (self.v[i] + c.epsilon).sqrt()
                    }
                    AccumulatorKind::Adam => {
                        let t = self.t.max(1).min(i32::MAX as u64) as i32;
                        let bc2 = 1.0 - c.beta2.powi(t);
                        1.0 / ((self.v[i] / bc2).sqrt() + c.epsilon)
                    }
                    AccumulatorKind::AmsGrad => 1.0 / (self.v_max[i].sqrt() + c.epsilon),
                };
                c.eta * s
            })
            .collect()
    }
}

/// An update rule whose direction is preconditioned by an accumulator.
///
/// The wrapped rule's update is treated as a negative gradient. Evaluation
/// previews the accumulator with the current gradient; the accumulator commits
/// once per step, alongside the base rule. Jacobian products hold the running
/// statistics fixed, so `G' = diag(scale) · G`.
#[derive(Debug, Clone)]
pub struct Preconditioned<R> {
    base: R,
    acc: Accumulator,
}

impl<R: UpdateRule> Preconditioned<R> {
    pub fn new(base: R, config: AccumulatorConfig) -> Result<Self> {
        let acc = Accumulator::new(config, base.dim())?;
        Ok(Self { base, acc })
    }

    /// RMSProp preconditioning with decay `rho`.
    pub fn rmsprop(base: R, rho: f64) -> Result<Self> {
        let mut config = AccumulatorConfig::new(AccumulatorKind::RmsProp, 1.0);
        config.rho = rho;
        Self::new(base, config)
    }

    pub fn base(&self) -> &R {
        &self.base
    }

    pub fn base_mut(&mut self) -> &mut R {
        &mut self.base
    }

    pub fn accumulator(&self) -> &Accumulator {
        &self.acc
    }

    fn gradient(&self, w: &[f64], sample: &R::Sample) -> Vec<f64> {
        self.base.evaluate(w, sample).into_iter().map(|d| -d).collect()
    }
}

impl<R: UpdateRule> UpdateRule for Preconditioned<R> {
    type Sample = R::Sample;

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn evaluate(&self, w: &[f64], sample: &R::Sample) -> Vec<f64> {
        self.acc.direction(&self.gradient(w, sample))
    }

    fn commit(&mut self, w: &[f64], sample: &R::Sample) {
        let g = self.gradient(w, sample);
        if self.acc.commit_gradient(&g).is_err() {
            log::warn!("preconditioner skipped a non-finite gradient");
        }
        self.base.commit(w, sample);
    }

    fn reset(&mut self) {
        self.base.reset();
    }

    fn jacobian(&self, w: &[f64], sample: &R::Sample) -> Option<Jacobian> {
        let scale = self.acc.local_scale(&self.gradient(w, sample));
        self.base.jacobian(w, sample).map(|g| g.scale_rows(&scale))
    }

    fn jtp(&self, w: &[f64], sample: &R::Sample, v: &[f64]) -> Option<Vec<f64>> {
        let scale = self.acc.local_scale(&self.gradient(w, sample));
        self.base.jtp(w, sample, &hadamard(&scale, v))
    }

    fn jvp(&self, w: &[f64], sample: &R::Sample, v: &[f64]) -> Option<Vec<f64>> {
        let scale = self.acc.local_scale(&self.gradient(w, sample));
        self.base.jvp(w, sample, v).map(|gv| hadamard(&scale, &gv))
    }

    fn jacobian_diagonal(&self, w: &[f64], sample: &R::Sample) -> Option<Vec<f64>> {
        let scale = self.acc.local_scale(&self.gradient(w, sample));
        self.base
            .jacobian_diagonal(w, sample)
            .map(|d| hadamard(&scale, &d))
    }
}

/// Lower bound kept on the hypergradient step size.
pub const HD_MIN_STEP: f64 = 1e-10;

/// Hypergradient descent with a scalar step size.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergradient {
    alpha: f64,
    meta_step: f64,
    prev_grad: Vec<f64>,
}

impl Hypergradient {
    pub fn new(k: usize, alpha0: f64, meta_step: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha0 must be > 0, got {alpha0}")));
        }
        if !(meta_step >= 0.0 && meta_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "meta step must be >= 0, got {meta_step}"
            )));
        }
        Ok(Self {
            alpha: alpha0,
            meta_step,
            prev_grad: vec![0.0; k],
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn previous_gradient(&self) -> &[f64] {
        &self.prev_grad
    }

    /// `α ← α + ᾱ gₜ₋₁ᵀgₜ`, then `w ← w − α gₜ`.
    pub fn step(&mut self, w: &WeightVector, g: &UpdateVector) -> Result<WeightVector> {
        check_dim(self.prev_grad.len(), w.len())?;
        check_dim(self.prev_grad.len(), g.len())?;
        let h = dot(&self.prev_grad, g);
        if !h.is_finite() {
            return Err(Error::NonFinite("hypergradient"));
        }
        let alpha = (self.alpha + self.meta_step * h).max(HD_MIN_STEP);
        let next = WeightVector::new(w.iter().zip(g.iter()).map(|(w, g)| w - alpha * g).collect())?;
        self.alpha = alpha;
        self.prev_grad.copy_from_slice(g);
        Ok(next)
    }
}

/// Bound on IDBD's log step sizes.
pub const IDBD_LOG_STEP_LIMIT: f64 = 15.0;

/// Incremental delta-bar-delta for LMS.
#[derive(Debug, Clone, PartialEq)]
pub struct Idbd {
    log_step: Vec<f64>,
    trace: Vec<f64>,
    meta_step: f64,
    clamp_events: u64,
}

impl Idbd {
    pub fn new(k: usize, alpha0: f64, meta_step: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha0 must be > 0, got {alpha0}")));
        }
        if !(meta_step >= 0.0 && meta_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "meta step must be >= 0, got {meta_step}"
            )));
        }
        Ok(Self {
            log_step: vec![alpha0.ln(); k],
            trace: vec![0.0; k],
            meta_step,
            clamp_events: 0,
        })
    }

    pub fn with_trace(mut self, trace: Vec<f64>) -> Result<Self> {
        check_dim(self.trace.len(), trace.len())?;
        self.trace = trace;
        Ok(self)
    }

    pub fn log_step_sizes(&self) -> &[f64] {
        &self.log_step
    }

    pub fn step_sizes(&self) -> StepSizeVector {
        StepSizeVector::from_raw(self.log_step.iter().map(|b| b.exp()).collect())
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    /// Number of times a log step size hit the ±15 bound.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// One LMS step with features `x` and error `δ = T − wᵀx`.
    pub fn step(&mut self, w: &WeightVector, x: &[f64], delta: f64) -> Result<WeightVector> {
        check_dim(self.trace.len(), x.len())?;
        let update: Vec<f64> = x.iter().map(|x| delta * x).collect();
        let jdiag: Vec<f64> = x.iter().map(|x| -x * x).collect();
        self.step_with(w, &update, &jdiag)
    }

    /// The same recursions written in terms of the update `Δ = δx` and the
    /// Jacobian diagonal `ĵ = −x²`.
    pub(crate) fn step_with(
        &mut self,
        w: &WeightVector,
        update: &[f64],
        jdiag: &[f64],
    ) -> Result<WeightVector> {
        let k = self.trace.len();
        check_dim(k, w.len())?;
        check_dim(k, update.len())?;
        if !all_finite(update) {
            return Err(Error::NonFinite("update"));
        }
        let mut next = w.as_slice().to_vec();
        for i in 0..k {
            let mut b = self.log_step[i] + self.meta_step * update[i] * self.trace[i];
            if b.abs() > IDBD_LOG_STEP_LIMIT {
                b = b.clamp(-IDBD_LOG_STEP_LIMIT, IDBD_LOG_STEP_LIMIT);
                self.clamp_events += 1;
                log::debug!("idbd log step size clamped on coordinate {i}");
            }
            self.log_step[i] = b;
            let a = b.exp();
            next[i] += a * update[i];
            self.trace[i] = self.trace[i] * (1.0 + a * jdiag[i]).max(0.0) + a * update[i];
        }
        WeightVector::new(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn wv(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    fn g(v: &[f64]) -> UpdateVector {
        UpdateVector::new(v.to_vec())
    }

    #[test]
    fn adagrad_first_step_normalises() {
        let mut cfg = AccumulatorConfig::new(AccumulatorKind::AdaGrad, 1.0);
        cfg.epsilon = 0.0;
        let mut acc = Accumulator::new(cfg, 2).unwrap();
        let w = acc.step(&wv(&[0.0, 0.0]), &g(&[3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(w[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn rmsprop_first_step() {
        let mut acc = Accumulator::new(AccumulatorConfig::new(AccumulatorKind::RmsProp, 1.0), 1).unwrap();
        let w = acc.step(&wv(&[0.0]), &g(&[1.0])).unwrap();
        assert_abs_diff_eq!(acc.second_moment()[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], -1.0 / (0.1f64.sqrt() + 1e-8), epsilon = 1e-12);
    }

    #[test]
    fn amsgrad_keeps_largest_second_moment() {
        let mut acc = Accumulator::new(AccumulatorConfig::new(AccumulatorKind::AmsGrad, 0.1), 1).unwrap();
        let w = acc.step(&wv(&[0.0]), &g(&[2.0])).unwrap();
        let after_first = acc.max_second_moment()[0];
        acc.step(&w, &g(&[1.0])).unwrap();
        assert!(acc.second_moment()[0] < after_first + 1e-3 * 4.0);
        assert!(acc.max_second_moment()[0] >= after_first);
        assert!(acc.max_second_moment()[0] >= acc.second_moment()[0]);
    }

    #[test]
    fn zero_gradient_never_moves_any_optimizer() {
        for kind in [
            AccumulatorKind::Sgd,
            AccumulatorKind::AdaGrad,
            AccumulatorKind::RmsProp,
            AccumulatorKind::AdaDelta,
            AccumulatorKind::Adam,
            AccumulatorKind::AmsGrad,
        ] {
            let mut acc = Accumulator::new(AccumulatorConfig::new(kind, 0.5), 3).unwrap();
            let mut w = wv(&[1.0, -2.0, 3.0]);
            for _ in 0..50 {
                w = acc.step(&w, &g(&[0.0, 0.0, 0.0])).unwrap();
            }
            assert_eq!(w.as_slice(), &[1.0, -2.0, 3.0], "{kind:?}");
        }
    }

    #[test]
    fn non_finite_gradient_leaves_state_unchanged() {
        let mut acc = Accumulator::new(AccumulatorConfig::new(AccumulatorKind::Adam, 0.1), 2).unwrap();
        acc.step(&wv(&[0.0, 0.0]), &g(&[1.0, 2.0])).unwrap();
        let before = acc.clone();
        assert!(acc.step(&wv(&[0.0, 0.0]), &g(&[f64::NAN, 1.0])).is_err());
        assert_eq!(acc, before);
    }

    #[test]
    fn adagrad_and_amsgrad_steps_never_grow() {
        let mut rng = 12345u64;
        let mut next = || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng % 2000) as f64 / 1000.0 - 1.0
        };
        for kind in [AccumulatorKind::AdaGrad, AccumulatorKind::AmsGrad] {
            let mut acc = Accumulator::new(AccumulatorConfig::new(kind, 0.3), 2).unwrap();
            let mut w = wv(&[0.0, 0.0]);
            let mut prev_eff = vec![f64::INFINITY; 2];
            let mut prev_v = vec![0.0; 2];
            for _ in 0..500 {
                w = acc.step(&w, &g(&[next() * 5.0, next()])).unwrap();
                let eff = acc.effective_step_sizes();
                for i in 0..2 {
                    assert!(eff[i] <= prev_eff[i]);
                }
                if kind == AccumulatorKind::AdaGrad {
                    for i in 0..2 {
                        assert!(acc.second_moment()[i] >= prev_v[i]);
                    }
                    prev_v = acc.second_moment().to_vec();
                }
                prev_eff = eff;
            }
        }
    }

    #[test]
    fn coordinates_are_independent() {
        // two coordinates together == two 1-D instances
        for kind in [
            AccumulatorKind::AdaGrad,
            AccumulatorKind::RmsProp,
            AccumulatorKind::AdaDelta,
            AccumulatorKind::Adam,
            AccumulatorKind::AmsGrad,
        ] {
            let cfg = AccumulatorConfig::new(kind, 0.05);
            let mut joint = Accumulator::new(cfg, 2).unwrap();
            let mut a = Accumulator::new(cfg, 1).unwrap();
            let mut b = Accumulator::new(cfg, 1).unwrap();
            let (mut wj, mut wa, mut wb) = (wv(&[1.0, -1.0]), wv(&[1.0]), wv(&[-1.0]));
            for t in 0..100 {
                let ga = (t as f64 * 0.37).sin();
                let gb = (t as f64 * 0.11).cos() * 3.0;
                wj = joint.step(&wj, &g(&[ga, gb])).unwrap();
                wa = a.step(&wa, &g(&[ga])).unwrap();
                wb = b.step(&wb, &g(&[gb])).unwrap();
            }
            assert_eq!(wj[0], wa[0], "{kind:?}");
            assert_eq!(wj[1], wb[0], "{kind:?}");
        }
    }

    #[test]
    fn hypergradient_examples() {
        let mut hd = Hypergradient::new(2, 0.1, 0.01).unwrap();
        let w = hd.step(&wv(&[0.0, 0.0]), &g(&[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(hd.alpha(), 0.1, epsilon = 1e-15);
        hd.step(&w, &g(&[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(hd.alpha(), 0.11, epsilon = 1e-15);

        let mut hd = Hypergradient::new(2, 0.1, 0.01).unwrap();
        let w = hd.step(&wv(&[0.0, 0.0]), &g(&[1.0, 0.0])).unwrap();
        hd.step(&w, &g(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(hd.alpha(), 0.1, epsilon = 1e-15);

        let mut hd = Hypergradient::new(1, 0.1, 0.01).unwrap();
        let w = hd.step(&wv(&[0.0]), &g(&[1.0])).unwrap();
        hd.step(&w, &g(&[-1.0])).unwrap();
        assert_abs_diff_eq!(hd.alpha(), 0.09, epsilon = 1e-15);
    }

    #[test]
    fn hypergradient_floor_and_errors() {
        let mut hd = Hypergradient::new(1, 0.1, 10.0).unwrap();
        let w = hd.step(&wv(&[0.0]), &g(&[1.0])).unwrap();
        hd.step(&w, &g(&[-1.0])).unwrap();
        assert_eq!(hd.alpha(), HD_MIN_STEP);
        let mut hd = Hypergradient::new(1, 0.1, 0.1).unwrap();
        hd.step(&wv(&[0.0]), &g(&[1e200])).unwrap();
        assert!(hd.step(&wv(&[0.0]), &g(&[1e200])).is_err());
    }

    #[test]
    fn idbd_first_step_leaves_log_step_alone() {
        let mut idbd = Idbd::new(2, 0.05, 0.1).unwrap();
        idbd.step(&wv(&[0.0, 0.0]), &[1.0, 2.0], 0.7).unwrap();
        assert_eq!(idbd.log_step_sizes(), &[0.05f64.ln(), 0.05f64.ln()]);
    }

    #[test]
    fn idbd_null_feature_changes_nothing() {
        let mut idbd = Idbd::new(2, 0.05, 0.1)
            .unwrap()
            .with_trace(vec![0.3, -0.2])
            .unwrap();
        let w = idbd.step(&wv(&[1.0, 2.0]), &[0.0, 0.0], 5.0).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 2.0]);
        assert_eq!(idbd.trace(), &[0.3, -0.2]);
        assert_eq!(idbd.log_step_sizes(), &[0.05f64.ln(), 0.05f64.ln()]);
    }

    #[test]
    fn idbd_scalar_one_step_oracle() {
        // hand-rolled recursions: x = 1, α = 0.1, δ = 1, θ = 0 keeps α fixed
        let h0 = 0.4;
        let mut idbd = Idbd::new(1, 0.1, 0.0).unwrap().with_trace(vec![h0]).unwrap();
        let w = idbd.step(&wv(&[2.0]), &[1.0], 1.0).unwrap();
        assert_abs_diff_eq!(w[0], 2.1, epsilon = 1e-12);
        assert_abs_diff_eq!(idbd.trace()[0], 0.9 * h0 + 0.1, epsilon = 1e-12);

        let mut idbd = Idbd::new(1, 0.1, 0.5).unwrap();
        let w = idbd.step(&wv(&[2.0]), &[1.0], 1.0).unwrap();
        assert_abs_diff_eq!(w[0], 2.1, epsilon = 1e-12);
        assert_abs_diff_eq!(idbd.trace()[0], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn idbd_clamps_log_step() {
        let mut idbd = Idbd::new(1, 1.0, 100.0).unwrap().with_trace(vec![1.0]).unwrap();
        let _ = idbd.step(&wv(&[0.0]), &[1.0], 1.0);
        assert_eq!(idbd.log_step_sizes()[0], IDBD_LOG_STEP_LIMIT);
        assert_eq!(idbd.clamp_events(), 1);
    }

    #[test]
    fn preconditioned_rule_probe_is_pure() {
        let base = crate::rule::FnRule::new(2, |w| vec![-w[0], -2.0 * w[1]]);
        let mut rule = Preconditioned::rmsprop(base, 0.9).unwrap();
        let w = [1.0, 1.0];
        let first = rule.evaluate(&w, &());
        let again = rule.evaluate(&w, &());
        assert_eq!(first, again);
        rule.commit(&w, &());
        assert_eq!(rule.accumulator().steps(), 1);
        assert_ne!(rule.evaluate(&w, &()), first);
    }
}
