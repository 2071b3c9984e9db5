use crate::linalg::{Jacobian, Matrix};
use crate::rule::UpdateRule;

/// `f = (1 − x)² + 100 (y − x²)²` and its gradient.
pub fn rosenbrock(w: &[f64]) -> (f64, [f64; 2]) {
    let (x, y) = (w[0], w[1]);
    let r = y - x * x;
    let f = (1.0 - x).powi(2) + 100.0 * r * r;
    let g = [-2.0 * (1.0 - x) - 400.0 * x * r, 200.0 * r];
    (f, g)
}

pub fn rosenbrock_hessian(w: &[f64]) -> Matrix {
    let (x, y) = (w[0], w[1]);
    Matrix::from_rows(&[
        vec![2.0 - 400.0 * (y - x * x) + 800.0 * x * x, -400.0 * x],
        vec![-400.0 * x, 200.0],
    ])
    .expect("2x2")
}

/// Gradient descent on the Rosenbrock function as an update rule:
/// `Δ = −∇f`, `G = −∇²f`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Rosenbrock;

impl UpdateRule for Rosenbrock {
    type Sample = ();

    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&self, w: &[f64], _: &()) -> Vec<f64> {
        let (_, g) = rosenbrock(w);
        vec![-g[0], -g[1]]
    }

    fn jacobian(&self, w: &[f64], _: &()) -> Option<Jacobian> {
        Some(Jacobian::Dense(rosenbrock_hessian(w).scale(-1.0)))
    }
}
