use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemId {
    Rosenbrock,
    Tracking,
    Baird,
}

impl ProblemId {
    pub const ALL: [ProblemId; 3] = [ProblemId::Rosenbrock, ProblemId::Tracking, ProblemId::Baird];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::Rosenbrock => "rosenbrock",
            ProblemId::Tracking => "tracking",
            ProblemId::Baird => "baird",
        }
    }

    /// Problem-specific keys accepted in [`ExperimentConfig::params`].
    pub fn param_keys(&self) -> &'static [&'static str] {
        match self {
            ProblemId::Rosenbrock => &["x0", "y0"],
            ProblemId::Tracking => &["schedule", "z0"],
            ProblemId::Baird => &["gamma", "lambda"],
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown problem {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmId {
    Sgd,
    AdaGrad,
    RmsProp,
    AdaDelta,
    Adam,
    AmsGrad,
    Hd,
    Idbd,
    SmdQuad,
    SmdLin,
    SmdOrig,
    AdaGainQuad,
    AdaGainLin,
    AdaGainFd,
    AdaGainTd,
    AdaGainFdRmsProp,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 16] = [
        AlgorithmId::Sgd,
        AlgorithmId::AdaGrad,
        AlgorithmId::RmsProp,
        AlgorithmId::AdaDelta,
        AlgorithmId::Adam,
        AlgorithmId::AmsGrad,
        AlgorithmId::Hd,
        AlgorithmId::Idbd,
        AlgorithmId::SmdQuad,
        AlgorithmId::SmdLin,
        AlgorithmId::SmdOrig,
        AlgorithmId::AdaGainQuad,
        AlgorithmId::AdaGainLin,
        AlgorithmId::AdaGainFd,
        AlgorithmId::AdaGainTd,
        AlgorithmId::AdaGainFdRmsProp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmId::Sgd => "sgd",
            AlgorithmId::AdaGrad => "adagrad",
            AlgorithmId::RmsProp => "rmsprop",
            AlgorithmId::AdaDelta => "adadelta",
            AlgorithmId::Adam => "adam",
            AlgorithmId::AmsGrad => "amsgrad",
            AlgorithmId::Hd => "hd",
            AlgorithmId::Idbd => "idbd",
            AlgorithmId::SmdQuad => "smd-quad",
            AlgorithmId::SmdLin => "smd-lin",
            AlgorithmId::SmdOrig => "smd-orig",
            AlgorithmId::AdaGainQuad => "adagain-quad",
            AlgorithmId::AdaGainLin => "adagain-lin",
            AlgorithmId::AdaGainFd => "adagain-fd",
            AlgorithmId::AdaGainTd => "adagain-td",
            AlgorithmId::AdaGainFdRmsProp => "adagain-fd-rmsprop",
        }
    }

    /// Hyperparameter keys the algorithm reads.
    pub fn param_keys(&self) -> &'static [&'static str] {
        const ACC: &[&str] = &["eta", "epsilon", "rho", "beta1", "beta2"];
        const ADAGAIN: &[&str] = &[
            "alpha0",
            "meta_step",
            "beta",
            "positivity",
            "alpha_floor",
            "meta_product",
            "precond_rho",
        ];
        const ADAGAIN_FD: &[&str] = &[
            "alpha0",
            "meta_step",
            "beta",
            "positivity",
            "alpha_floor",
            "precond_rho",
            "radius",
        ];
        match self {
            AlgorithmId::Sgd
            | AlgorithmId::AdaGrad
            | AlgorithmId::RmsProp
            | AlgorithmId::AdaDelta
            | AlgorithmId::Adam
            | AlgorithmId::AmsGrad => ACC,
            AlgorithmId::Hd | AlgorithmId::Idbd => &["alpha0", "meta_step"],
            AlgorithmId::SmdQuad | AlgorithmId::SmdLin | AlgorithmId::SmdOrig => &["alpha0", "meta_step", "beta"],
            AlgorithmId::AdaGainQuad | AlgorithmId::AdaGainLin | AlgorithmId::AdaGainTd => ADAGAIN,
            AlgorithmId::AdaGainFd | AlgorithmId::AdaGainFdRmsProp => ADAGAIN_FD,
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "adagain-lms" {
            return Ok(AlgorithmId::AdaGainLin);
        }
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

/// How a run is scored for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Score {
    /// Mean error over every step.
    Mean,
    /// Error after the last step.
    Final,
}

impl FromStr for Score {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Score::Mean),
            "final" => Ok(Score::Final),
            _ => Err(Error::InvalidParameter(format!("unknown score {s:?}, expected mean or final"))),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Score::Mean => "mean",
            Score::Final => "final",
        })
    }
}

/// Everything needed to reproduce a batch of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    pub algorithm: AlgorithmId,
    /// Algorithm hyperparameters and problem parameters, as text.
    pub params: BTreeMap<String, String>,
    pub steps: u64,
    pub runs: u64,
    pub base_seed: u64,
    /// Record interval; `None` picks 100 for runs over 10⁵ steps and 1
    /// otherwise, `Some(0)` disables curve records.
    pub log_every: Option<u64>,
    /// Divergence threshold on the running error; `None` uses the problem
    /// default.
    pub threshold: Option<f64>,
    /// Error reported for diverged configurations; `None` uses the threshold.
    pub ceiling: Option<f64>,
    /// `None` uses mean error on tracking and final error elsewhere.
    pub score: Option<Score>,
    /// Number of recent steps averaged by the divergence detector.
    pub divergence_window: u64,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemId, algorithm: AlgorithmId, steps: u64) -> Self {
        Self {
            problem,
            algorithm,
            params: BTreeMap::new(),
            steps,
            runs: 1,
            base_seed: 0,
            log_every: None,
            threshold: None,
            ceiling: None,
            score: None,
            divergence_window: 100,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_owned(), value.to_string());
        self
    }

    pub fn with_runs(mut self, runs: u64) -> Self {
        self.runs = runs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be >= 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be >= 1".into()));
        }
        if self.divergence_window == 0 {
            return Err(Error::InvalidParameter("divergence window must be >= 1".into()));
        }
        let known = self.algorithm.param_keys();
        let problem = self.problem.param_keys();
        let unknown: Vec<&str> = self
            .params
            .keys()
            .map(String::as_str)
            .filter(|k| !known.contains(k) && !problem.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "unknown parameter(s) for {} on {}: {}",
                self.algorithm,
                self.problem,
                unknown.join(", ")
            )));
        }
        if let Some(t) = self.threshold {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::InvalidParameter(format!("threshold must be > 0, got {t}")));
            }
        }
        Ok(())
    }

    pub fn f64_param(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("{key} must be a number, got {v:?}"))),
        }
    }

    pub fn str_param<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.params.get(key).map_or(default, String::as_str)
    }

    pub fn effective_log_every(&self) -> u64 {
        self.log_every
            .unwrap_or(if self.steps > 100_000 { 100 } else { 1 })
    }

    pub fn effective_score(&self) -> Score {
        self.score.unwrap_or(match self.problem {
            ProblemId::Tracking => Score::Mean,
            _ => Score::Final,
        })
    }

    /// Canonical `key=value` lines describing the configuration, seeds
    /// and run count excluded.
    pub fn canonical(&self) -> String {
        let mut lines = vec![
            format!("problem={}", self.problem),
            format!("algorithm={}", self.algorithm),
            format!("steps={}", self.steps),
            format!("score={}", self.effective_score()),
            format!("divergence_window={}", self.divergence_window),
        ];
        // the effective threshold, so spelling out the default keeps the hash
        let threshold = self.threshold.map_or_else(|| crate::harness::default_threshold(self), Ok);
        if let Ok(t) = threshold {
            lines.push(format!("threshold={t:?}"));
        }
        if let Some(c) = self.ceiling {
            lines.push(format!("ceiling={c}"));
        }
        for (k, v) in &self.params {
            lines.push(format!("param.{k}={v}"));
        }
        lines.join("\n")
    }

    /// First 16 hex digits of the SHA-256 of [`ExperimentConfig::canonical`].
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
