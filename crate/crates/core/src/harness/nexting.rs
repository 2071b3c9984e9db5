//! Many parallel discounted predictions of future sensor values, one
//! AdaGain-TD learner per sensor, all sharing the same feature vector.

use rayon::prelude::*;

use crate::adagain::{AdaGainConfig, AdaGainLinear};
use crate::baselines::Preconditioned;
use crate::error::{Error, Result};
use crate::harness::metrics::{aggregate_median, SmapeAccumulator};
use crate::linalg::dot;
use crate::problems::{ideal_returns, SeriesSource};
use crate::td::{TdLambda, TdSample};

pub const NEXTING_GAMMA: f64 = 0.9875;

#[derive(Debug, Clone, PartialEq)]
pub struct NextingConfig {
    pub adagain: AdaGainConfig,
    pub gamma: f64,
    pub lambda: f64,
    /// RMSProp decay for preconditioning the TD update; `None` uses plain TD.
    pub precond_rho: Option<f64>,
    /// Truncation tolerance for the ideal returns.
    pub return_tol: f64,
    /// Width of the bins the SMAPE curve is averaged over.
    pub bin: usize,
    /// Use `2|P−T|/(|P|+|T|)` instead of `|P−T|/(|P|+|T|)`.
    pub smape_doubled: bool,
    /// Limit on the number of steps; `None` uses the whole series.
    pub max_steps: Option<usize>,
}

impl Default for NextingConfig {
    fn default() -> Self {
        Self {
            adagain: AdaGainConfig::new(0.01, 1e-3, 0.1),
            gamma: NEXTING_GAMMA,
            lambda: 0.0,
            precond_rho: Some(0.999),
            return_tol: 1e-6,
            bin: 1000,
            smape_doubled: false,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorResult {
    pub name: String,
    /// Mean SMAPE per bin, indexed like [`NextingOutput::bin_ends`].
    pub smape_curve: Vec<f64>,
    pub mean_smape: f64,
    pub final_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NextingOutput {
    /// Step (exclusive) at which each bin closes.
    pub bin_ends: Vec<u64>,
    pub sensors: Vec<SensorResult>,
    /// Per-bin lower median across sensors.
    pub median_curve: Vec<f64>,
}

/// Bias-augmented feature row.
fn features(row: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(row.len() + 1);
    x.extend_from_slice(row);
    x.push(1.0);
    x
}

enum Rule {
    Plain(TdLambda),
    Pre(Preconditioned<TdLambda>),
}

fn run_sensor(series: &SeriesSource, j: usize, steps: usize, cfg: &NextingConfig) -> Result<SensorResult> {
    let rows = series.rows();
    let k = series.num_sensors() + 1;
    let column = series.column(j);
    let targets = ideal_returns(&column, cfg.gamma, cfg.return_tol)?;
    let mut learner = AdaGainLinear::new(k, cfg.adagain)?;
    let td = TdLambda::new(k, cfg.lambda)?;
    let mut rule = match cfg.precond_rho {
        Some(rho) => Rule::Pre(Preconditioned::rmsprop(td, rho)?),
        None => Rule::Plain(td),
    };
    let mut w = vec![0.0; k];
    let mut curve = Vec::new();
    let mut bin = SmapeAccumulator::new();
    let mut total = SmapeAccumulator::new();
    if cfg.smape_doubled {
        bin = SmapeAccumulator::doubled();
        total = SmapeAccumulator::doubled();
    }
    let fresh = || if cfg.smape_doubled { SmapeAccumulator::doubled() } else { SmapeAccumulator::new() };
    let mut x = features(&rows[0]);
    for t in 0..steps {
        let x_next = features(&rows[t + 1]);
        let prediction = dot(&w, &x);
        bin.push(prediction, targets[t]);
        total.push(prediction, targets[t]);
        let sample = TdSample::on_policy(x, x_next.clone(), column[t + 1], cfg.gamma);
        let next = match &mut rule {
            Rule::Plain(r) => learner.step(r, &w, &sample),
            Rule::Pre(r) => learner.step(r, &w, &sample),
        }
        .map_err(|e| match e {
            Error::Diverged { step, reason } => Error::Diverged {
                step,
                reason: format!("sensor {}: {reason}", series.sensor_names()[j]),
            },
            other => other,
        })?;
        w = next.into_inner();
        x = x_next;
        if (t + 1) % cfg.bin == 0 || t + 1 == steps {
            curve.push(bin.mean());
            bin = fresh();
        }
    }
    Ok(SensorResult {
        name: series.sensor_names()[j].clone(),
        smape_curve: curve,
        mean_smape: total.mean(),
        final_weights: w,
    })
}

/// Learn a discounted prediction of every sensor and score each against
/// its ideal return. Features are the sensor row plus a bias term; the
/// pseudo-reward for sensor `j` is its next value.
pub fn run_nexting(series: &SeriesSource, cfg: &NextingConfig) -> Result<NextingOutput> {
    cfg.adagain.validate()?;
    if cfg.bin == 0 {
        return Err(Error::InvalidParameter("bin width must be > 0".into()));
    }
    if series.len() < 2 {
        return Err(Error::InvalidParameter("series needs at least two rows".into()));
    }
    let steps = cfg.max_steps.map_or(series.len() - 1, |m| m.min(series.len() - 1));
    let sensors = (0..series.num_sensors())
        .into_par_iter()
        .map(|j| run_sensor(series, j, steps, cfg))
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<Vec<f64>> = sensors.iter().map(|s| s.smape_curve.clone()).collect();
    let median_curve = aggregate_median(&curves)?;
    let bin_ends = (0..median_curve.len())
        .map(|i| ((i + 1) * cfg.bin).min(steps) as u64)
        .collect();
    Ok(NextingOutput {
        bin_ends,
        sensors,
        median_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_series(n: usize, sensors: usize) -> SeriesSource {
        let names = (0..sensors).map(|j| format!("s{j}")).collect();
        let rows = (0..n)
            .map(|t| {
                (0..sensors)
                    .map(|j| (t as f64 * 0.01 * (j + 1) as f64).sin() + 2.0)
                    .collect()
            })
            .collect();
        SeriesSource::from_rows(names, rows).unwrap()
    }

    #[test]
    fn curve_shapes() {
        let s = sine_series(2501, 3);
        let cfg = NextingConfig {
            bin: 1000,
            ..Default::default()
        };
        let out = run_nexting(&s, &cfg).unwrap();
        assert_eq!(out.bin_ends, vec![1000, 2000, 2500]);
        assert_eq!(out.sensors.len(), 3);
        assert!(out.median_curve.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn prediction_error_falls_on_a_smooth_signal() {
        let s = sine_series(20_001, 2);
        let out = run_nexting(&s, &NextingConfig::default()).unwrap();
        let first = out.median_curve[0];
        let last = *out.median_curve.last().unwrap();
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn too_short_series_rejected() {
        let s = sine_series(1, 2);
        assert!(run_nexting(&s, &NextingConfig::default()).is_err());
    }
}
