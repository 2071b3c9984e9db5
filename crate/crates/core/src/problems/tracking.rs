use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A stretch of the schedule with fixed noise levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration: u64,
    /// Observation noise.
    pub sigma_y: f64,
    /// Drift of the latent mean.
    pub sigma_z: f64,
}

impl Segment {
    pub fn new(duration: u64, sigma_y: f64, sigma_z: f64) -> Self {
        Self {
            duration,
            sigma_y,
            sigma_z,
        }
    }

    /// 6 × 20,000 steps cycling through (σ_Y, σ_Z) = (1, 0.1), (1, 1), (0.1, 1).
    pub fn default_schedule() -> Vec<Segment> {
        let levels = [(1.0, 0.1), (1.0, 1.0), (0.1, 1.0)];
        (0..6)
            .map(|i| {
                let (y, z) = levels[i % 3];
                Segment::new(20_000, y, z)
            })
            .collect()
    }
}

/// What the learner sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub y: f64,
}

/// Evaluation-only ground truth for the current step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentTruth {
    pub segment: usize,
    pub sigma_y: f64,
    pub sigma_z: f64,
    /// Latent mean the observation was drawn around.
    pub z: f64,
}

/// A drifting Gaussian mean observed through noise. The schedule repeats
/// once exhausted.
#[derive(Debug, Clone)]
pub struct TrackingEnv {
    schedule: Vec<Segment>,
    z: f64,
    segment: usize,
    pos: u64,
    rng: ChaCha8Rng,
}

impl TrackingEnv {
    pub fn new(schedule: Vec<Segment>, seed: u64) -> Result<Self> {
        if schedule.is_empty() {
            return Err(Error::InvalidParameter("schedule needs at least one segment".into()));
        }
        for s in &schedule {
            if s.duration == 0 {
                return Err(Error::InvalidParameter("segment durations must be >= 1".into()));
            }
            if !(s.sigma_y >= 0.0 && s.sigma_z >= 0.0 && s.sigma_y.is_finite() && s.sigma_z.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "noise levels must be finite and >= 0, got ({}, {})",
                    s.sigma_y, s.sigma_z
                )));
            }
        }
        Ok(Self {
            schedule,
            z: 0.0,
            segment: 0,
            pos: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn with_initial_mean(mut self, z0: f64) -> Self {
        self.z = z0;
        self
    }

    pub fn schedule(&self) -> &[Segment] {
        &self.schedule
    }

    /// Total length of one pass through the schedule.
    pub fn period(&self) -> u64 {
        self.schedule.iter().map(|s| s.duration).sum()
    }

    pub fn step(&mut self) -> (Observation, SegmentTruth) {
        let seg = self.schedule[self.segment];
        let noise: f64 = StandardNormal.sample(&mut self.rng);
        let drift: f64 = StandardNormal.sample(&mut self.rng);
        let truth = SegmentTruth {
            segment: self.segment,
            sigma_y: seg.sigma_y,
            sigma_z: seg.sigma_z,
            z: self.z,
        };
        let y = self.z + seg.sigma_y * noise;
        self.z += seg.sigma_z * drift;
        self.pos += 1;
        if self.pos == seg.duration {
            self.pos = 0;
            self.segment = (self.segment + 1) % self.schedule.len();
        }
        (Observation { y }, truth)
    }
}

/// Steady-state Kalman gain for a random walk observed in noise, which is
/// the MSE-optimal constant step size for LMS on this problem.
pub fn optimal_constant_stepsize(sigma_y: f64, sigma_z: f64) -> Result<f64> {
    if !(sigma_y > 0.0 && sigma_y.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma_y must be > 0, got {sigma_y}")));
    }
    if !(sigma_z >= 0.0 && sigma_z.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma_z must be >= 0, got {sigma_z}")));
    }
    let (q, r) = (sigma_z * sigma_z, sigma_y * sigma_y);
    let m = (q + (q * q + 4.0 * q * r).sqrt()) / 2.0;
    Ok(m / (m + r))
}
