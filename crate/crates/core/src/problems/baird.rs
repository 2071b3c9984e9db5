use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::td::TdSample;

pub const BAIRD_STATES: usize = 7;
pub const BAIRD_GAMMA: f64 = 0.99;
pub const BAIRD_INITIAL_WEIGHTS: [f64; 8] = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 10.0, 1.0];

/// Star features for states `1..=7`: states 1–6 put 2 on their own component
/// and 1 on the shared eighth, state 7 puts 1 on the seventh and 2 on the
/// eighth.
pub fn baird_features(state: usize) -> Result<[f64; 8]> {
    let mut x = [0.0; 8];
    match state {
        1..=6 => {
            x[state - 1] = 2.0;
            x[7] = 1.0;
        }
        7 => {
            x[6] = 1.0;
            x[7] = 2.0;
        }
        _ => return Err(Error::InvalidParameter(format!("Baird states are 1..=7, got {state}"))),
    }
    Ok(x)
}

/// 7 × 8 matrix with row `s − 1` holding the features of state `s`.
pub fn baird_feature_matrix() -> Matrix {
    Matrix::from_fn(BAIRD_STATES, 8, |i, j| baird_features(i + 1).expect("valid state")[j])
}

/// Baird's seven-state counterexample under the behaviour policy.
///
/// The behaviour policy takes the solid action (to state 7) with probability
/// 1/7 and the dashed action (uniformly to states 1–6) otherwise; the target
/// policy always takes the solid action, so `ρ = 7` on solid transitions and
/// `0` on dashed ones. Rewards are zero.
#[derive(Debug, Clone)]
pub struct BairdEnv {
    state: usize,
    gamma: f64,
    rng: ChaCha8Rng,
}

impl BairdEnv {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = rng.random_range(1..=BAIRD_STATES);
        Self {
            state,
            gamma: BAIRD_GAMMA,
            rng,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn step(&mut self) -> TdSample {
        let solid = self.rng.random_range(0..BAIRD_STATES) == 0;
        let (next, rho) = if solid {
            (7, BAIRD_STATES as f64)
        } else {
            (self.rng.random_range(1..=6), 0.0)
        };
        let x = baird_features(self.state).expect("valid state").to_vec();
        let x_next = baird_features(next).expect("valid state").to_vec();
        self.state = next;
        TdSample {
            x,
            x_next,
            reward: 0.0,
            gamma: self.gamma,
            gamma_next: self.gamma,
            rho,
        }
    }
}
