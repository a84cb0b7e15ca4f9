use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How each tree's subsample is drawn from the training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

/// Fully resolved forest parameters for one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    /// Number of trees `M`.
    pub num_trees: usize,
    /// Features drawn as split candidates at each expansion.
    pub mtry: usize,
    /// Rows drawn per tree (`a_n`).
    pub subsample_size: usize,
    /// Leaf budget per tree (`t_n`).
    pub max_leaves: usize,
    pub min_leaf_size: usize,
    pub resampling: Resampling,
    pub master_seed: u64,
}

impl ForestConfig {
    /// Checks every domain constraint against a dataset of `n` rows and `p` features.
    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::config("num_trees must be positive"));
        }
        if self.mtry == 0 || self.mtry > p {
            return Err(Error::config(format!("mtry must lie in [1, {p}], got {}", self.mtry)));
        }
        if self.subsample_size == 0 {
            return Err(Error::config("subsample_size must be positive"));
        }
        if self.resampling == Resampling::WithoutReplacement && self.subsample_size > n {
            return Err(Error::config(format!(
                "subsample_size {} exceeds n = {n} under sampling without replacement",
                self.subsample_size
            )));
        }
        if self.max_leaves == 0 || self.max_leaves > self.subsample_size {
            return Err(Error::config(format!(
                "max_leaves must lie in [1, {}], got {}",
                self.subsample_size, self.max_leaves
            )));
        }
        if self.min_leaf_size == 0 {
            return Err(Error::config("min_leaf_size must be positive"));
        }
        Ok(())
    }
}

/// Subsample size rule, resolved against `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsampleRule {
    Size(usize),
    /// `ceil(frac * n)`.
    Fraction(f64),
}

/// Partially specified forest parameters; unset fields take conventional
/// regression-forest defaults once `n` and `p` are known.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub num_trees: usize,
    pub mtry: Option<usize>,
    pub subsample: Option<SubsampleRule>,
    pub max_leaves: Option<usize>,
    pub min_leaf_size: usize,
    pub resampling: Resampling,
    pub master_seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            num_trees: 500,
            mtry: None,
            subsample: None,
            max_leaves: None,
            min_leaf_size: 1,
            resampling: Resampling::WithoutReplacement,
            master_seed: 0,
        }
    }
}

pub const DEFAULT_SUBSAMPLE_FRACTION: f64 = 0.632;

/// `max(1, ceil(p / 3))`.
pub fn default_mtry(p: usize) -> usize {
    p.div_ceil(3).max(1)
}

/// `ceil(0.632 n)`.
pub fn practical_subsample_size(n: usize) -> usize {
    fraction_size(DEFAULT_SUBSAMPLE_FRACTION, n)
}

fn fraction_size(frac: f64, n: usize) -> usize {
    // Guard against 0.632 * n landing a hair above an integer.
    let raw = frac * n as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

impl ForestParams {
    pub fn resolve(&self, n: usize, p: usize) -> Result<ForestConfig> {
        let subsample_size = match self.subsample {
            None => practical_subsample_size(n),
            Some(SubsampleRule::Size(a)) => a,
            Some(SubsampleRule::Fraction(f)) => {
                if !(f > 0.0 && f.is_finite()) {
                    return Err(Error::config(format!("subsample fraction must be positive, got {f}")));
                }
                fraction_size(f, n)
            }
        };
        let cfg = ForestConfig {
            num_trees: self.num_trees,
            mtry: self.mtry.unwrap_or_else(|| default_mtry(p)),
            subsample_size,
            max_leaves: self.max_leaves.unwrap_or(subsample_size),
            min_leaf_size: self.min_leaf_size,
            resampling: self.resampling,
            master_seed: self.master_seed,
        };
        cfg.validate(n, p)?;
        Ok(cfg)
    }
}
