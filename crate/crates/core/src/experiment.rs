//! Repeated episodes, per-step confidence intervals and result files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::domain::{DomainError, RandomSource};
use crate::planner::{run_episode, EpisodeSpec, EpisodeTrace, PlanError, Variant};
use crate::program::Program;
use crate::rescue::{rescue_program, mcts_program, RescueConfig};
use crate::search::SearchParams;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("need at least two traces of equal length, got {0}")]
    InsufficientData(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

impl From<DomainError> for ExperimentError {
    fn from(e: DomainError) -> Self {
        ExperimentError::Plan(PlanError::Domain(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// The guided rescue program.
    #[default]
    Mcap,
    /// Plain tree search over every legal action.
    Mcts,
}

impl Policy {
    pub fn program(self) -> Program {
        match self {
            Policy::Mcap => rescue_program(),
            Policy::Mcts => mcts_program(),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Mcap => "mcap",
            Policy::Mcts => "mcts",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub policy: Policy,
    pub rescue: RescueConfig,
    pub search: SearchParams,
    pub horizon: usize,
    /// Episode cap.
    pub episodes: usize,
    /// Target CI half-width at every step, for both ratios.
    pub ci_target: f64,
    pub ci_level: f64,
    pub seed: u64,
    /// Episodes run between stopping checks.
    pub batch: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            variant: Variant::Base,
            policy: Policy::Mcap,
            rescue: RescueConfig::default(),
            search: SearchParams::new(40, 0.9, 10.0, 1000).expect("valid defaults"),
            horizon: 50,
            episodes: 100,
            ci_target: 0.05,
            ci_level: 0.95,
            seed: 0,
            batch: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.episodes < 2 {
            return bad("episodes must be at least 2");
        }
        if !(self.ci_target > 0.0) {
            return bad("ci target must be positive");
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad("ci level must lie in (0, 1)");
        }
        if self.horizon < 1 || self.batch < 1 {
            return bad("horizon and batch must be at least 1");
        }
        self.search.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.rescue.validate()?;
        Ok(())
    }

    pub fn episode_spec(&self) -> EpisodeSpec {
        EpisodeSpec {
            rescue: self.rescue.clone(),
            search: self.search,
            program: self.policy.program(),
            variant: self.variant,
            horizon: self.horizon,
        }
    }

    /// Seed of episode `i`. Independent of the policy, so runs of both
    /// policies face the same worlds.
    pub fn episode_seed(&self, i: usize) -> u64 {
        RandomSource::derive_seed(self.seed, i as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatRow {
    pub step: usize,
    pub mean_safe: f64,
    pub err_safe: f64,
    pub mean_burning: f64,
    pub err_burning: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatTable {
    pub rows: Vec<StatRow>,
    pub episodes: usize,
}

impl StatTable {
    pub fn max_half_width(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.err_safe.max(r.err_burning))
            .fold(0.0, f64::max)
    }

    pub fn safe_means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_safe).collect()
    }

    pub fn burning_means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_burning).collect()
    }
}

/// Sample mean and Student-t half-width at confidence `level`.
pub fn mean_and_half_width(xs: &[f64], level: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return (mean, 0.0);
    }
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + level / 2.0);
    (mean, t * var.sqrt() / n.sqrt())
}

/// Per-step means and half-widths of both ratios, steps `0..=horizon`.
pub fn aggregate(traces: &[EpisodeTrace], level: f64) -> Result<StatTable, ExperimentError> {
    let series: Vec<(Vec<f64>, Vec<f64>)> = traces.iter().map(|t| (t.safe_series(), t.burning_series())).collect();
    aggregate_series(&series, level)
}

/// Like [`aggregate`], over per-episode `(safe, burning)` series.
pub fn aggregate_series(series: &[(Vec<f64>, Vec<f64>)], level: f64) -> Result<StatTable, ExperimentError> {
    if series.len() < 2 {
        return Err(ExperimentError::InsufficientData(format!("{} trace(s)", series.len())));
    }
    let len = series[0].0.len();
    if series.iter().any(|(s, b)| s.len() != len || b.len() != len) {
        return Err(ExperimentError::InsufficientData("traces differ in length".into()));
    }
    let rows = (0..len)
        .map(|k| {
            let safe: Vec<f64> = series.iter().map(|(s, _)| s[k]).collect();
            let burning: Vec<f64> = series.iter().map(|(_, b)| b[k]).collect();
            let (mean_safe, err_safe) = mean_and_half_width(&safe, level);
            let (mean_burning, err_burning) = mean_and_half_width(&burning, level);
            StatRow {
                step: k,
                mean_safe,
                err_safe,
                mean_burning,
                err_burning,
            }
        })
        .collect();
    Ok(StatTable {
        rows,
        episodes: series.len(),
    })
}

/// Runs batches of episodes in parallel until every step meets the CI
/// target or the cap is reached. Batches are fixed-size, so the result does
/// not depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<StatTable, ExperimentError> {
    cfg.validate()?;
    let spec = cfg.episode_spec();
    let mut traces: Vec<EpisodeTrace> = Vec::new();
    loop {
        let from = traces.len();
        let to = (from + cfg.batch.max(2 - from.min(2))).min(cfg.episodes);
        let batch: Result<Vec<EpisodeTrace>, PlanError> = (from..to)
            .into_par_iter()
            .map(|i| run_episode(&spec, cfg.episode_seed(i)))
            .collect();
        traces.extend(batch?);
        let table = aggregate(&traces, cfg.ci_level)?;
        if traces.len() >= cfg.episodes || table.max_half_width() <= cfg.ci_target {
            return Ok(table);
        }
    }
}

pub fn format_results(table: &StatTable) -> String {
    let mut out = String::new();
    for r in &table.rows {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            r.step, r.mean_safe, r.err_safe, r.mean_burning, r.err_burning
        ));
    }
    out
}

pub fn write_results(table: &StatTable, path: &Path) -> Result<(), ExperimentError> {
    fs::write(path, format_results(table)).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a result file back. The episode count is not stored and reads as 0.
pub fn read_results(path: &Path) -> Result<StatTable, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format_err = |line: usize, detail: &str| ExperimentError::Format {
        path: path.to_path_buf(),
        detail: format!("line {line}: {detail}"),
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 5 {
            return Err(format_err(i + 1, "expected 5 columns"));
        }
        let step = cols[0].parse().map_err(|_| format_err(i + 1, "bad step"))?;
        let mut v = [0.0; 4];
        for (slot, c) in v.iter_mut().zip(&cols[1..]) {
            *slot = c.parse().map_err(|_| format_err(i + 1, "bad number"))?;
        }
        rows.push(StatRow {
            step,
            mean_safe: v[0],
            err_safe: v[1],
            mean_burning: v[2],
            err_burning: v[3],
        });
    }
    Ok(StatTable { rows, episodes: 0 })
}

/// A scenario file: `RescueConfig` keys plus an optional `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub rescue: RescueConfig,
    pub seed: Option<u64>,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, String> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
    let seed = match table.remove("seed") {
        None => None,
        Some(toml::Value::Integer(n)) if n >= 0 => Some(n as u64),
        Some(v) => return Err(format!("seed must be a non-negative integer, got {v}")),
    };
    let rescue: RescueConfig = table.try_into().map_err(|e: toml::de::Error| e.to_string())?;
    rescue.validate().map_err(|e| e.to_string())?;
    Ok(Scenario { rescue, seed })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text).map_err(|detail| ExperimentError::Format {
        path: path.to_path_buf(),
        detail,
    })
}
