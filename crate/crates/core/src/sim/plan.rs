use serde::Serialize;

use super::model::SimulationModel;
use crate::error::{Error, Result};
use crate::forest::{practical_subsample_size, ForestConfig, Resampling};
use crate::variance::BootstrapConfig;

/// Rule mapping the sample size `n` to the subsample size `a_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleSchedule {
    /// `ceil(0.632 n)`.
    Practical,
    /// `ceil(n^0.45)`, so that `a_n^2 / n -> 0`.
    Theory,
}

pub const THEORY_EXPONENT: f64 = 0.45;

impl SubsampleSchedule {
    pub fn subsample_size(self, n: usize) -> usize {
        match self {
            SubsampleSchedule::Practical => practical_subsample_size(n),
            SubsampleSchedule::Theory => (n as f64).powf(THEORY_EXPONENT).ceil() as usize,
        }
    }
}

/// Forest settings shared by every cell of a plan; `a_n` comes from the schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForestTemplate {
    pub num_trees: usize,
    /// Defaults to `ceil(p/3)`.
    pub mtry: Option<usize>,
    /// Defaults to `a_n` (fully grown).
    pub max_leaves: Option<usize>,
    pub min_leaf_size: usize,
    pub resampling: Resampling,
}

impl Default for ForestTemplate {
    fn default() -> Self {
        Self { num_trees: 300, mtry: None, max_leaves: None, min_leaf_size: 1, resampling: Resampling::WithoutReplacement }
    }
}

impl ForestTemplate {
    pub fn resolve(&self, n: usize, p: usize, subsample_size: usize, master_seed: u64) -> Result<ForestConfig> {
        let cfg = ForestConfig {
            num_trees: self.num_trees,
            mtry: self.mtry.unwrap_or_else(|| crate::forest::default_mtry(p)),
            subsample_size,
            max_leaves: self.max_leaves.unwrap_or(subsample_size),
            min_leaf_size: self.min_leaf_size,
            resampling: self.resampling,
            master_seed,
        };
        cfg.validate(n, p)?;
        Ok(cfg)
    }
}

/// A grid of simulation cells, one per sample size, each replicated `reps` times.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub model: SimulationModel,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub forest: ForestTemplate,
    pub schedule: SubsampleSchedule,
    pub boot: BootstrapConfig,
    pub plan_seed: u64,
}

fn strictly_increasing(xs: &[usize]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(Error::config(format!("reps must be at least 2, got {}", self.reps)));
        }
        if self.n_grid.is_empty() || !strictly_increasing(&self.n_grid) {
            return Err(Error::config(format!("n grid must be non-empty and strictly increasing: {:?}", self.n_grid)));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::config("every n must be at least 2"));
        }
        if self.schedule == SubsampleSchedule::Theory {
            let ratios: Vec<f64> = self.n_grid.iter().map(|&n| self.subsample_size(n) as f64).map(|a| a * a).zip(&self.n_grid).map(|(a2, &n)| a2 / n as f64).collect();
            if ratios.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::config(format!(
                    "theory schedule must make a_n^2/n decrease along the grid; got {ratios:?}"
                )));
            }
        }
        for &n in &self.n_grid {
            self.forest.resolve(n, self.model.p(), self.subsample_size(n), 0)?;
        }
        Ok(())
    }

    pub fn subsample_size(&self, n: usize) -> usize {
        self.schedule.subsample_size(n)
    }
}

/// Plan for the tree-count convergence study on one fixed dataset.
#[derive(Debug, Clone)]
pub struct MConvergencePlan {
    pub model: SimulationModel,
    pub n: usize,
    pub m_grid: Vec<usize>,
    pub reps: usize,
    pub forest: ForestTemplate,
    pub schedule: SubsampleSchedule,
    /// Row whose OOB prediction is tracked.
    pub probe_row: usize,
    pub seed: u64,
}

impl MConvergencePlan {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(Error::config(format!("reps must be at least 2 for a standard deviation, got {}", self.reps)));
        }
        if self.m_grid.is_empty() || !strictly_increasing(&self.m_grid) || self.m_grid[0] == 0 {
            return Err(Error::config(format!("tree grid must be positive and strictly increasing: {:?}", self.m_grid)));
        }
        if self.probe_row >= self.n {
            return Err(Error::config("probe row out of range"));
        }
        self.forest.resolve(self.n, self.model.p(), self.schedule.subsample_size(self.n), 0)?;
        Ok(())
    }
}
