use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;

/// Compensated running sum, so that the mean barely depends on order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Running mean of `(P − T)²`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MseAccumulator {
    total: CompensatedSum,
    n: u64,
}

impl MseAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, prediction: f64, target: f64) {
        let e = prediction - target;
        self.push_squared(e * e);
    }

    pub fn push_squared(&mut self, sq: f64) {
        self.total.add(sq);
        self.n += 1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Zero for an empty stream.
    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.total.value() / self.n as f64
        }
    }
}

/// Running mean of `|P − T| / (|P| + |T|)`, taken as 0 when both are 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SmapeAccumulator {
    total: CompensatedSum,
    n: u64,
    doubled: bool,
}

impl SmapeAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// The `2|P − T| / (|P| + |T|)` variant, in `[0, 2]`.
    pub fn doubled() -> Self {
        Self {
            doubled: true,
            ..Self::default()
        }
    }

    pub fn term(&self, prediction: f64, target: f64) -> f64 {
        let denom = prediction.abs() + target.abs();
        let v = if denom == 0.0 {
            0.0
        } else {
            (prediction - target).abs() / denom
        };
        if self.doubled {
            2.0 * v
        } else {
            v
        }
    }

    pub fn push(&mut self, prediction: f64, target: f64) {
        let v = self.term(prediction, target);
        self.total.add(v);
        self.n += 1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.total.value() / self.n as f64
        }
    }
}

/// `√(Σ_s d_s (x_sᵀw − v*_s)²)` with rows of `features` as `x_s`. The state
/// weights must sum to one.
pub fn rmsve(w: &[f64], features: &Matrix, values: &[f64], weights: &[f64]) -> Result<f64> {
    check_dim(features.cols(), w.len())?;
    check_dim(features.rows(), values.len())?;
    check_dim(features.rows(), weights.len())?;
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|d| *d < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "state weights must be non-negative and sum to 1, got sum {total}"
        )));
    }
    let pred = features.mul_vec(w);
    let sq: f64 = pred
        .iter()
        .zip(values)
        .zip(weights)
        .map(|((p, v), d)| d * (p - v) * (p - v))
        .sum();
    Ok(sq.sqrt())
}

/// True when the running error exceeds `threshold` or anything is non-finite.
pub fn detect_divergence(error: f64, weights_norm: f64, threshold: f64) -> bool {
    !error.is_finite() || !weights_norm.is_finite() || error > threshold
}

/// Element-wise median across curves of equal length. Even counts take the
/// lower of the two middle values.
pub fn aggregate_median(curves: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = curves.first() else {
        return Err(Error::InvalidParameter("no curves to aggregate".into()));
    };
    let len = first.len();
    for c in curves {
        check_dim(len, c.len())?;
    }
    let mut column = Vec::with_capacity(curves.len());
    Ok((0..len)
        .map(|i| {
            column.clear();
            column.extend(curves.iter().map(|c| c[i]));
            column.sort_by(f64::total_cmp);
            column[(column.len() - 1) / 2]
        })
        .collect())
}
