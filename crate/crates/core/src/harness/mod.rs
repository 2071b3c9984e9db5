//! Experiment harness: seeded runs, sweeps, metrics and CSV output.

mod config;
mod learner;
mod metrics;
mod nexting;
mod output;
mod run;
mod sweep;

pub use config::{AlgorithmId, ExperimentConfig, ProblemId, Score};
pub use learner::Learner;
pub use metrics::{aggregate_median, detect_divergence, rmsve, MseAccumulator, SmapeAccumulator};
pub use nexting::{run_nexting, NextingConfig, NextingOutput, SensorResult, NEXTING_GAMMA};
pub use output::{format_f64, write_curves, write_series, write_sweep};
pub use run::{
    default_threshold, parse_schedule, run, run_single, schedule_optimal_mse, RunOutput, RunRecord, RunSummary,
};
pub use sweep::{sweep, Grid, SweepResult, SweepRow};
