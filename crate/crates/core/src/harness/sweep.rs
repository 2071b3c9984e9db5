use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::run::{default_threshold, run};

/// Named parameter axes; cells are their Cartesian product with the last
/// axis varying fastest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grid {
    axes: Vec<(String, Vec<String>)>,
}

impl Grid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn axis<T: ToString>(mut self, name: &str, values: impl IntoIterator<Item = T>) -> Result<Self> {
        let values: Vec<String> = values.into_iter().map(|v| v.to_string()).collect();
        if values.is_empty() {
            return Err(Error::InvalidParameter(format!("grid axis {name:?} has no values")));
        }
        if self.axes.iter().any(|(n, _)| n == name) {
            return Err(Error::InvalidParameter(format!("grid axis {name:?} given twice")));
        }
        self.axes.push((name.to_owned(), values));
        Ok(self)
    }

    pub fn names(&self) -> Vec<String> {
        self.axes.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    pub fn cells(&self) -> Vec<Vec<(String, String)>> {
        let mut cells = vec![Vec::new()];
        for (name, values) in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|cell| {
                    values.iter().map(move |v| {
                        let mut c = cell.clone();
                        c.push((name.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

/// One configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub algorithm: String,
    pub params: Vec<(String, String)>,
    pub config_hash: String,
    /// Mean score over runs, or the ceiling when any run diverged.
    pub mean_error: f64,
    /// Lower median of the run scores, diverged runs counting as the ceiling.
    pub median_error: f64,
    pub diverged: bool,
    /// Earliest divergence across runs.
    pub divergence_step: Option<u64>,
    pub diverged_runs: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param_names: Vec<String>,
    pub ceiling: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| !r.diverged)
            .min_by(|a, b| a.mean_error.total_cmp(&b.mean_error))
    }

    pub fn diverged_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.diverged).count() as f64 / self.rows.len() as f64
    }
}

fn lower_median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    xs[(xs.len() - 1) / 2]
}

fn sweep_cells(template: &ExperimentConfig, grid: &Grid) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid has no axes".into()));
    }
    template.validate()?;
    let cells = grid.cells();
    let configs: Vec<ExperimentConfig> = cells
        .iter()
        .map(|cell| {
            let mut c = template.clone();
            for (k, v) in cell {
                c.params.insert(k.clone(), v.clone());
            }
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    let threshold = template.threshold.map_or_else(|| default_threshold(template), Ok)?;
    let ceiling = template
        .ceiling
        .unwrap_or(if threshold.is_finite() { threshold } else { f64::MAX });
    let score = template.effective_score();
    let rows = configs
        .par_iter()
        .zip(cells.par_iter())
        .map(|(cfg, cell)| {
            let out = run(cfg)?;
            let diverged_runs = out.summaries.iter().filter(|s| s.diverged).count() as u64;
            let diverged = diverged_runs > 0;
            let scores: Vec<f64> = out
                .summaries
                .iter()
                .map(|s| if s.diverged { ceiling } else { s.score(score) })
                .collect();
            let mean_error = if diverged {
                ceiling
            } else {
                scores.iter().sum::<f64>() / scores.len() as f64
            };
            let median_error = lower_median(scores);
            Ok(SweepRow {
                algorithm: cfg.algorithm.to_string(),
                params: cell.clone(),
                config_hash: cfg.config_hash(),
                mean_error,
                median_error,
                diverged,
                divergence_step: out.summaries.iter().filter_map(|s| s.divergence_step).min(),
                diverged_runs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        param_names: grid.names(),
        ceiling,
        rows,
    })
}

/// Run every cell of `grid` on top of `template`. `jobs = 0` uses all cores.
/// Row order follows [`Grid::cells`] whatever the scheduling.
pub fn sweep(template: &ExperimentConfig, grid: &Grid, jobs: usize) -> Result<SweepResult> {
    if jobs == 0 {
        return sweep_cells(template, grid);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| sweep_cells(template, grid))
}
