//! Benchmark environments and their analytic oracles.

mod baird;
mod rosenbrock;
mod series;
mod tracking;

pub use baird::{
    baird_feature_matrix, baird_features, BairdEnv, BAIRD_GAMMA, BAIRD_INITIAL_WEIGHTS, BAIRD_STATES,
};
pub use rosenbrock::{rosenbrock, rosenbrock_hessian, Rosenbrock};
pub use series::{ideal_discounted_return, ideal_returns, load_series_csv, SeriesOptions, SeriesSource};
pub use tracking::{optimal_constant_stepsize, Observation, Segment, SegmentTruth, TrackingEnv};
