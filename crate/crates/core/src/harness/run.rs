use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, ProblemId, Score};
use crate::harness::learner::Learner;
use crate::harness::metrics::{detect_divergence, rmsve};
use crate::linalg::{dot, Matrix};
use crate::problems::{
    baird_feature_matrix, optimal_constant_stepsize, rosenbrock, BairdEnv, Rosenbrock, Segment, TrackingEnv,
    BAIRD_GAMMA, BAIRD_INITIAL_WEIGHTS, BAIRD_STATES,
};
use crate::rule::UpdateRule;
use crate::td::{Lms, RegressionSample, TdLambda, TdSample};
use crate::vector::WeightVector;

/// One logged value.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub step: u64,
    pub metric: String,
    pub value: f64,
}

/// Outcome of a single seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    /// Error at the last completed step.
    pub final_error: f64,
    /// Mean error over completed steps.
    pub mean_error: f64,
    pub diverged: bool,
    pub divergence_step: Option<u64>,
    pub steps_completed: u64,
    pub final_weights: Vec<f64>,
    pub final_step_sizes: Vec<f64>,
}

impl RunSummary {
    pub fn score(&self, score: Score) -> f64 {
        match score {
            Score::Mean => self.mean_error,
            Score::Final => self.final_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<RunSummary>,
}

/// Parse `duration:sigma_y:sigma_z` segments separated by commas.
pub fn parse_schedule(text: &str) -> Result<Vec<Segment>> {
    text.split(',')
        .map(|seg| {
            let parts: Vec<&str> = seg.trim().split(':').collect();
            let bad = || Error::InvalidParameter(format!("bad schedule segment {seg:?}, expected steps:sigma_y:sigma_z"));
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok(Segment::new(
                parts[0].parse().map_err(|_| bad())?,
                parts[1].parse().map_err(|_| bad())?,
                parts[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

fn schedule(cfg: &ExperimentConfig) -> Result<Vec<Segment>> {
    match cfg.params.get("schedule") {
        Some(s) => parse_schedule(s),
        None => Ok(Segment::default_schedule()),
    }
}

/// Duration-weighted MSE of LMS at the optimal constant gain, i.e. the
/// one-step prediction variance `m + σ_Y²` averaged over the schedule.
pub fn schedule_optimal_mse(schedule: &[Segment]) -> Result<f64> {
    let total: u64 = schedule.iter().map(|s| s.duration).sum();
    let mut acc = 0.0;
    for s in schedule {
        let k = optimal_constant_stepsize(s.sigma_y, s.sigma_z)?;
        let r = s.sigma_y * s.sigma_y;
        // k = m / (m + R)  ⇒  m = k R / (1 − k)
        let m = k * r / (1.0 - k);
        acc += (m + r) * s.duration as f64;
    }
    Ok(acc / total as f64)
}

fn rosenbrock_start(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = rng.random_range(-2.0..2.0);
    let y = rng.random_range(-1.0..3.0);
    Ok(vec![cfg.f64_param("x0", x)?, cfg.f64_param("y0", y)?])
}

fn baird_rmsve(w: &[f64], x: &Matrix) -> f64 {
    let d = vec![1.0 / BAIRD_STATES as f64; BAIRD_STATES];
    rmsve(w, x, &[0.0; BAIRD_STATES], &d).unwrap_or(f64::NAN)
}

/// Default divergence threshold: 100× a reference error for the problem.
pub fn default_threshold(cfg: &ExperimentConfig) -> Result<f64> {
    Ok(match cfg.problem {
        ProblemId::Tracking => 100.0 * schedule_optimal_mse(&schedule(cfg)?)?,
        ProblemId::Rosenbrock => {
            // worst start in the sampling box is f(−2, −1) = 2509
            let start = match (cfg.params.get("x0"), cfg.params.get("y0")) {
                (Some(_), Some(_)) => rosenbrock(&rosenbrock_start(cfg, 0)?).0,
                _ => rosenbrock(&[-2.0, -1.0]).0,
            };
            100.0 * start.max(1.0)
        }
        ProblemId::Baird => 100.0 * baird_rmsve(&BAIRD_INITIAL_WEIGHTS, &baird_feature_matrix()),
    })
}

struct Monitor<'a> {
    hash: &'a str,
    seed: u64,
    log_every: u64,
    threshold: f64,
    window: u64,
    running: f64,
    sum: f64,
    n: u64,
    last: f64,
    records: Vec<RunRecord>,
}

impl<'a> Monitor<'a> {
    fn record(&mut self, step: u64, metric: &str, value: f64) {
        self.records.push(RunRecord {
            config_hash: self.hash.to_owned(),
            seed: self.seed,
            step,
            metric: metric.to_owned(),
            value,
        });
    }

    /// Returns true when the run has diverged.
    fn observe(&mut self, step: u64, error: f64, w: &[f64], alpha: &[f64], last_step: bool) -> bool {
        self.n += 1;
        self.sum += error;
        self.last = error;
        // cumulative mean over the first `window` steps, then an EMA
        let rate = 1.0 / (self.n.min(self.window)) as f64;
        self.running += rate * (error - self.running);
        let wnorm = dot(w, w).sqrt();
        if self.log_every > 0 && (step.is_multiple_of(self.log_every) || last_step) {
            self.record(step, "error", error);
            let mean = alpha.iter().sum::<f64>() / alpha.len().max(1) as f64;
            self.record(step, "alpha_mean", mean);
            for (i, a) in alpha.iter().enumerate() {
                self.record(step, &format!("alpha_{i}"), *a);
            }
            self.record(step, "weights_norm", wnorm);
        }
        detect_divergence(self.running, wnorm, self.threshold)
    }
}

struct Outcome {
    summary: RunSummary,
    records: Vec<RunRecord>,
}

fn drive<R: UpdateRule>(
    cfg: &ExperimentConfig,
    mon: &mut Monitor,
    learner: &mut Learner<R>,
    w0: Vec<f64>,
    mut sample: impl FnMut() -> R::Sample,
    mut error: impl FnMut(&[f64], &[f64], &R::Sample) -> f64,
) -> Result<RunSummary> {
    let mut w = WeightVector::new(w0)?;
    let mut divergence_step = None;
    let mut completed = 0;
    for step in 1..=cfg.steps {
        let s = sample();
        let next = match learner.step(&w, &s) {
            Ok(next) => next,
            Err(Error::Diverged { .. } | Error::NonFinite(_) | Error::NonFiniteProbe { .. }) => {
                divergence_step = Some(step);
                break;
            }
            Err(e) => return Err(e),
        };
        let e = error(&w, &next, &s);
        w = next;
        completed = step;
        if mon.observe(step, e, &w, &learner.step_sizes(), step == cfg.steps) {
            divergence_step = Some(step);
            break;
        }
    }
    if let Some(step) = divergence_step {
        log::info!("seed {} diverged at step {step}", mon.seed);
        mon.record(step, "diverged", 1.0);
    }
    Ok(RunSummary {
        seed: mon.seed,
        final_error: mon.last,
        mean_error: if mon.n == 0 { f64::NAN } else { mon.sum / mon.n as f64 },
        diverged: divergence_step.is_some(),
        divergence_step,
        steps_completed: completed,
        final_weights: w.into_inner(),
        final_step_sizes: learner.step_sizes(),
    })
}

fn run_seed(cfg: &ExperimentConfig, hash: &str, threshold: f64, seed: u64) -> Result<Outcome> {
    let mut mon = Monitor {
        hash,
        seed,
        log_every: cfg.effective_log_every(),
        threshold,
        window: cfg.divergence_window,
        running: 0.0,
        sum: 0.0,
        n: 0,
        last: f64::NAN,
        records: Vec::new(),
    };
    let summary = match cfg.problem {
        ProblemId::Rosenbrock => {
            let mut learner = Learner::build(cfg, Rosenbrock)?;
            let w0 = rosenbrock_start(cfg, seed)?;
            drive(cfg, &mut mon, &mut learner, w0, || (), |_, w, _| rosenbrock(w).0)?
        }
        ProblemId::Tracking => {
            let mut env = TrackingEnv::new(schedule(cfg)?, seed)?.with_initial_mean(cfg.f64_param("z0", 0.0)?);
            let mut learner = Learner::build(cfg, Lms::new(1))?;
            drive(
                cfg,
                &mut mon,
                &mut learner,
                vec![0.0],
                || RegressionSample {
                    x: vec![1.0],
                    target: env.step().0.y,
                },
                |w, _, s: &RegressionSample| {
                    let e = s.target - dot(w, &s.x);
                    e * e
                },
            )?
        }
        ProblemId::Baird => {
            let gamma = cfg.f64_param("gamma", BAIRD_GAMMA)?;
            let lambda = cfg.f64_param("lambda", 0.0)?;
            let mut env = BairdEnv::new(seed).with_gamma(gamma)?;
            let mut learner = Learner::build(cfg, TdLambda::new(8, lambda)?)?;
            let x = baird_feature_matrix();
            drive(
                cfg,
                &mut mon,
                &mut learner,
                BAIRD_INITIAL_WEIGHTS.to_vec(),
                || env.step(),
                |_, w, _: &TdSample| baird_rmsve(w, &x),
            )?
        }
    };
    Ok(Outcome {
        summary,
        records: mon.records,
    })
}

/// A single seeded run.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<(RunSummary, Vec<RunRecord>)> {
    cfg.validate()?;
    let threshold = cfg.threshold.map_or_else(|| default_threshold(cfg), Ok)?;
    let hash = cfg.config_hash();
    let out = run_seed(cfg, &hash, threshold, seed)?;
    Ok((out.summary, out.records))
}

/// All runs of a configuration; run `i` uses seed `base_seed + i`. Results
/// are ordered by seed regardless of scheduling.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let threshold = cfg.threshold.map_or_else(|| default_threshold(cfg), Ok)?;
    let hash = cfg.config_hash();
    let outcomes: Vec<Outcome> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| run_seed(cfg, &hash, threshold, cfg.base_seed.wrapping_add(i)))
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut summaries = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        records.extend(o.records);
        summaries.push(o.summary);
    }
    Ok(RunOutput { records, summaries })
}
