//! Centered finite-difference Jacobian products.
//!
//! Both products reuse one pair of probes `Δ(w ± r·u)`: the centered
//! difference is the directional derivative `G·u`, and dividing it
//! element-wise by a guarded `u` gives an estimate of the Jacobian diagonal.
//! With `u = Δ_t` this is the only Jacobian information the generic AdaGain
//! wrapper needs, at the cost of two extra rule evaluations per step.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, Matrix};
use crate::rule::UpdateRule;

/// Default probe radius `r`.
pub const DEFAULT_PROBE_RADIUS: f64 = 1e-3;

/// Floor on `|u_i|` when normalising the diagonal estimate.
pub const DIRECTION_GUARD: f64 = 1e-6;

/// Both finite-difference products from a single pair of probes.
#[derive(Debug, Clone, PartialEq)]
pub struct FdProducts {
    /// Centered difference `(Δ(w + r u) − Δ(w − r u)) / 2r`.
    pub directional: Vec<f64>,
    /// `directional / (sign(u) · max(guard, |u|))`.
    pub diagonal: Vec<f64>,
}

fn centered_difference<R: UpdateRule>(
    rule: &R,
    w: &[f64],
    sample: &R::Sample,
    u: &[f64],
    r: f64,
) -> Result<Vec<f64>> {
    check_dim(w.len(), u.len())?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("probe radius must be > 0, got {r}")));
    }
    let plus: Vec<f64> = w.iter().zip(u).map(|(w, u)| w + r * u).collect();
    let minus: Vec<f64> = w.iter().zip(u).map(|(w, u)| w - r * u).collect();
    let hi = rule.evaluate(&plus, sample);
    let lo = rule.evaluate(&minus, sample);
    check_dim(w.len(), hi.len())?;
    if !all_finite(&hi) || !all_finite(&lo) {
        return Err(Error::NonFiniteProbe {
            direction: u.to_vec(),
        });
    }
    let out: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| (h - l) / (2.0 * r)).collect();
    if !all_finite(&out) {
        return Err(Error::NonFiniteProbe {
            direction: u.to_vec(),
        });
    }
    Ok(out)
}

/// `sign(u) · max(guard, |u|)`, with `sign(0)` taken as `+1`.
fn guarded(u: f64) -> f64 {
    let m = u.abs().max(DIRECTION_GUARD);
    if u < 0.0 {
        -m
    } else {
        m
    }
}

/// Finite-difference Jacobian product along `u`, used as the estimate of
/// `GᵀΔ` when `u = Δ`.
pub fn jtp_finite_difference<R: UpdateRule>(
    rule: &R,
    w: &[f64],
    sample: &R::Sample,
    u: &[f64],
    r: f64,
) -> Result<Vec<f64>> {
    centered_difference(rule, w, sample, u, r)
}

/// Finite-difference estimate of the Jacobian diagonal, probing along `u`.
pub fn jdiag_finite_difference<R: UpdateRule>(
    rule: &R,
    w: &[f64],
    sample: &R::Sample,
    u: &[f64],
    r: f64,
) -> Result<Vec<f64>> {
    let d = centered_difference(rule, w, sample, u, r)?;
    Ok(d.iter().zip(u).map(|(d, u)| d / guarded(*u)).collect())
}

/// Both products with exactly two rule evaluations.
pub fn finite_difference_products<R: UpdateRule>(
    rule: &R,
    w: &[f64],
    sample: &R::Sample,
    u: &[f64],
    r: f64,
) -> Result<FdProducts> {
    let directional = centered_difference(rule, w, sample, u, r)?;
    let diagonal = directional.iter().zip(u).map(|(d, u)| d / guarded(*u)).collect();
    Ok(FdProducts {
        directional,
        diagonal,
    })
}

/// Full Jacobian by centered differences along each coordinate axis.
/// Costs `2k` rule evaluations, so only meant for small `k`.
pub fn jacobian_finite_difference<R: UpdateRule>(
    rule: &R,
    w: &[f64],
    sample: &R::Sample,
    r: f64,
) -> Result<Matrix> {
    let k = w.len();
    let mut g = Matrix::zeros(k, k);
    let mut axis = vec![0.0; k];
    for j in 0..k {
        axis[j] = 1.0;
        let col = centered_difference(rule, w, sample, &axis, r)?;
        for (i, v) in col.into_iter().enumerate() {
            g.set(i, j, v);
        }
        axis[j] = 0.0;
    }
    Ok(g)
}
