use crate::adagain::{AdaGainConfig, AdaGainLinear, AdaGainQuadratic, FdConfig, MetaProduct, Positivity, DEFAULT_ALPHA_FLOOR};
use crate::baselines::{Accumulator, AccumulatorConfig, AccumulatorKind, Hypergradient, Idbd, Preconditioned};
use crate::error::{Error, Result};
use crate::harness::config::{AlgorithmId, ExperimentConfig, ProblemId};
use crate::rule::UpdateRule;
use crate::smd::{SmdConfig, SmdLinear, SmdOriginal, SmdQuadratic};
use crate::vector::{UpdateVector, WeightVector};

/// An update rule paired with the step-size method driving it.
pub enum Learner<R: UpdateRule> {
    Accumulator(Accumulator, R),
    Hd(Hypergradient, R),
    Idbd(Idbd, R),
    SmdQuad(SmdQuadratic, R),
    SmdLin(SmdLinear, R),
    SmdOrig(SmdOriginal, R),
    AdaGainQuad(AdaGainQuadratic, R),
    AdaGainLin(AdaGainLinear, R),
    AdaGainPre(AdaGainLinear, Preconditioned<R>),
    AdaGainFd(AdaGainLinear, R, FdConfig),
    AdaGainFdPre(AdaGainLinear, Preconditioned<R>, FdConfig),
}

fn negated(v: Vec<f64>) -> UpdateVector {
    UpdateVector::new(v.into_iter().map(|x| -x).collect())
}

fn accumulator_config(kind: AccumulatorKind, cfg: &ExperimentConfig) -> Result<AccumulatorConfig> {
    let mut c = AccumulatorConfig::new(kind, cfg.f64_param("eta", 0.01)?);
    c.epsilon = cfg.f64_param("epsilon", c.epsilon)?;
    c.rho = cfg.f64_param("rho", c.rho)?;
    c.beta1 = cfg.f64_param("beta1", c.beta1)?;
    c.beta2 = cfg.f64_param("beta2", c.beta2)?;
    Ok(c)
}

fn adagain_config(cfg: &ExperimentConfig) -> Result<AdaGainConfig> {
    let positivity = match cfg.str_param("positivity", "exp") {
        "exp" | "exponential" => Positivity::Exponential,
        "threshold" | "thresholded" => Positivity::Thresholded {
            floor: cfg.f64_param("alpha_floor", DEFAULT_ALPHA_FLOOR)?,
        },
        other => {
            return Err(Error::InvalidParameter(format!(
                "positivity must be exp or threshold, got {other:?}"
            )))
        }
    };
    let meta_product = match cfg.str_param("meta_product", "transposed") {
        "transposed" => MetaProduct::Transposed,
        "direct" => MetaProduct::Direct,
        other => {
            return Err(Error::InvalidParameter(format!(
                "meta_product must be transposed or direct, got {other:?}"
            )))
        }
    };
    let c = AdaGainConfig {
        alpha0: cfg.f64_param("alpha0", 0.1)?,
        meta_step: cfg.f64_param("meta_step", 1e-3)?,
        beta: cfg.f64_param("beta", 0.1)?,
        positivity,
        meta_product,
    };
    c.validate()?;
    Ok(c)
}

fn smd_config(cfg: &ExperimentConfig) -> Result<SmdConfig> {
    Ok(SmdConfig::new(
        cfg.f64_param("alpha0", 0.1)?,
        cfg.f64_param("meta_step", 1e-3)?,
        cfg.f64_param("beta", 0.1)?,
    ))
}

impl<R: UpdateRule> Learner<R> {
    pub fn build(cfg: &ExperimentConfig, rule: R) -> Result<Self> {
        let k = rule.dim();
        let kind = match cfg.algorithm {
            AlgorithmId::Sgd => Some(AccumulatorKind::Sgd),
            AlgorithmId::AdaGrad => Some(AccumulatorKind::AdaGrad),
            AlgorithmId::RmsProp => Some(AccumulatorKind::RmsProp),
            AlgorithmId::AdaDelta => Some(AccumulatorKind::AdaDelta),
            AlgorithmId::Adam => Some(AccumulatorKind::Adam),
            AlgorithmId::AmsGrad => Some(AccumulatorKind::AmsGrad),
            _ => None,
        };
        if let Some(kind) = kind {
            return Ok(Learner::Accumulator(Accumulator::new(accumulator_config(kind, cfg)?, k)?, rule));
        }
        let alpha0 = cfg.f64_param("alpha0", 0.1)?;
        let meta_step = cfg.f64_param("meta_step", 1e-3)?;
        let fd = FdConfig {
            radius: cfg.f64_param("radius", crate::fd::DEFAULT_PROBE_RADIUS)?,
        };
        Ok(match cfg.algorithm {
            AlgorithmId::Hd => Learner::Hd(Hypergradient::new(k, alpha0, meta_step)?, rule),
            AlgorithmId::Idbd => {
                if cfg.problem != ProblemId::Tracking {
                    return Err(Error::InvalidParameter("idbd is defined for LMS (tracking) only".into()));
                }
                Learner::Idbd(Idbd::new(k, alpha0, meta_step)?, rule)
            }
            AlgorithmId::SmdQuad => Learner::SmdQuad(SmdQuadratic::new(k, smd_config(cfg)?)?, rule),
            AlgorithmId::SmdLin => Learner::SmdLin(SmdLinear::new(k, smd_config(cfg)?)?, rule),
            AlgorithmId::SmdOrig => Learner::SmdOrig(SmdOriginal::new(k, smd_config(cfg)?)?, rule),
            AlgorithmId::AdaGainQuad => Learner::AdaGainQuad(AdaGainQuadratic::new(k, adagain_config(cfg)?)?, rule),
            AlgorithmId::AdaGainLin | AlgorithmId::AdaGainTd => {
                if cfg.algorithm == AlgorithmId::AdaGainTd && cfg.problem == ProblemId::Rosenbrock {
                    return Err(Error::InvalidParameter("adagain-td needs a TD or LMS problem".into()));
                }
                let ag = AdaGainLinear::new(k, adagain_config(cfg)?)?;
                let rho = cfg.f64_param("precond_rho", 0.0)?;
                if rho > 0.0 {
                    Learner::AdaGainPre(ag, Preconditioned::rmsprop(rule, rho)?)
                } else {
                    Learner::AdaGainLin(ag, rule)
                }
            }
            AlgorithmId::AdaGainFd => {
                let ag = AdaGainLinear::new(k, adagain_config(cfg)?)?;
                let rho = cfg.f64_param("precond_rho", 0.0)?;
                if rho > 0.0 {
                    Learner::AdaGainFdPre(ag, Preconditioned::rmsprop(rule, rho)?, fd)
                } else {
                    Learner::AdaGainFd(ag, rule, fd)
                }
            }
            AlgorithmId::AdaGainFdRmsProp => {
                let ag = AdaGainLinear::new(k, adagain_config(cfg)?)?;
                let rho = cfg.f64_param("precond_rho", 0.9)?;
                Learner::AdaGainFdPre(ag, Preconditioned::rmsprop(rule, rho)?, fd)
            }
            _ => unreachable!("accumulators handled above"),
        })
    }

    pub fn rule(&self) -> &R {
        match self {
            Learner::Accumulator(_, r)
            | Learner::Hd(_, r)
            | Learner::Idbd(_, r)
            | Learner::SmdQuad(_, r)
            | Learner::SmdLin(_, r)
            | Learner::SmdOrig(_, r)
            | Learner::AdaGainQuad(_, r)
            | Learner::AdaGainLin(_, r)
            | Learner::AdaGainFd(_, r, _) => r,
            Learner::AdaGainPre(_, p) | Learner::AdaGainFdPre(_, p, _) => p.base(),
        }
    }

    pub fn step(&mut self, w: &WeightVector, s: &R::Sample) -> Result<WeightVector> {
        match self {
            Learner::Accumulator(acc, rule) => {
                let g = negated(rule.evaluate(w, s));
                let next = acc.step(w, &g)?;
                rule.commit(w, s);
                Ok(next)
            }
            Learner::Hd(hd, rule) => {
                let g = negated(rule.evaluate(w, s));
                let next = hd.step(w, &g)?;
                rule.commit(w, s);
                Ok(next)
            }
            Learner::Idbd(idbd, rule) => {
                let delta = rule.evaluate(w, s);
                let jd = rule
                    .jacobian_diagonal(w, s)
                    .ok_or(Error::MissingJacobian("Jacobian diagonal"))?;
                let next = idbd.step_with(w, &delta, &jd)?;
                rule.commit(w, s);
                Ok(next)
            }
            Learner::SmdQuad(m, rule) => m.step_rule(rule, w, s),
            Learner::SmdLin(m, rule) => m.step_rule(rule, w, s),
            Learner::SmdOrig(m, rule) => m.step_rule(rule, w, s),
            Learner::AdaGainQuad(m, rule) => m.step(rule, w, s),
            Learner::AdaGainLin(m, rule) => m.step(rule, w, s),
            Learner::AdaGainPre(m, rule) => m.step(rule, w, s),
            Learner::AdaGainFd(m, rule, fd) => m.step_fd(rule, w, s, fd),
            Learner::AdaGainFdPre(m, rule, fd) => m.step_fd(rule, w, s, fd),
        }
    }

    /// Current per-weight step sizes. For preconditioned learners this is
    /// the AdaGain gain alone.
    pub fn step_sizes(&self) -> Vec<f64> {
        match self {
            Learner::Accumulator(acc, _) => acc.effective_step_sizes(),
            Learner::Hd(hd, rule) => vec![hd.alpha(); rule.dim()],
            Learner::Idbd(idbd, _) => idbd.step_sizes().into_inner(),
            Learner::SmdQuad(m, _) => m.alpha_slice().to_vec(),
            Learner::SmdLin(m, _) => m.alpha_slice().to_vec(),
            Learner::SmdOrig(m, _) => m.alpha_slice().to_vec(),
            Learner::AdaGainQuad(m, _) => m.alpha_slice().to_vec(),
            Learner::AdaGainLin(m, _)
            | Learner::AdaGainPre(m, _)
            | Learner::AdaGainFd(m, _, _)
            | Learner::AdaGainFdPre(m, _, _) => m.alpha_slice().to_vec(),
        }
    }
}
