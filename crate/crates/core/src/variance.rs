//! Residual variance estimators built on out-of-bag predictions.
//!
//! * `sigma2_rf`: population variance of the OOB residuals.
//! * `sigma2_boot`: `sigma2_rf` minus a parametric-bootstrap estimate of the
//!   variance the forest smoother itself adds, either by Monte Carlo
//!   (`r_hat_B`) or in closed form as the `B -> inf` limit (`r_infinity`).
//! * `sigma2_fast`: `sigma2_rf * (1 - 1/a_n^2)`.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::json::{serialize_f64, serialize_opt_f64};
use crate::oob::{oob_predictions_routed, oob_weight_matrix_routed, OobRouting, OobWeightMatrix};
use crate::rng::{derive_seed, stream};

/// Largest tolerated share of rows without any OOB tree.
pub const MAX_UNCOVERED_FRACTION: f64 = 0.2;

/// Distribution of the synthetic bootstrap noise; its variance is always the
/// current `sigma2_rf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseLaw {
    #[default]
    Normal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    /// Monte Carlo replicates `B`; `0` skips the Monte Carlo correction.
    pub replicates: usize,
    pub noise: NoiseLaw,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: 0, noise: NoiseLaw::Normal, seed: 0 }
    }
}

/// OOB residuals of the covered rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub rows: Vec<usize>,
    pub values: Vec<f64>,
    pub n_uncovered: usize,
}

/// `Y_i - m_oob(X_i)` for every row with an OOB prediction.
pub fn oob_residuals(data: &Dataset, oob: &[Option<f64>]) -> Result<Residuals> {
    let y = data.response();
    let (rows, values): (Vec<usize>, Vec<f64>) =
        oob.iter().enumerate().filter_map(|(i, m)| m.map(|m| (i, y[i] - m))).unzip();
    if rows.len() < 2 {
        return Err(Error::estimation(format!(
            "only {} of {} rows have out-of-bag predictions; need at least 2",
            rows.len(),
            y.len()
        )));
    }
    Ok(Residuals { n_uncovered: y.len() - rows.len(), rows, values })
}

/// Mean-centred variance with divisor equal to the number of residuals.
pub fn sigma2_rf(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::estimation("residual variance needs at least 2 residuals"));
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    Ok(residuals.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n)
}

/// `sigma2 * (1 - 1/a_n^2)`.
pub fn sigma2_fast(sigma2_rf: f64, subsample_size: usize) -> f64 {
    let a = subsample_size as f64;
    sigma2_rf * (1.0 - 1.0 / (a * a))
}

/// Completes OOB predictions into a full vector, using `fallback[i]` where row
/// `i` has none.
pub fn fill_uncovered(oob: &[Option<f64>], fallback: impl Fn(usize) -> f64) -> Vec<f64> {
    oob.iter().enumerate().map(|(i, m)| m.unwrap_or_else(|| fallback(i))).collect()
}

/// OOB predictions of the forest after feeding it `y_star` through the fixed
/// tree partitions, i.e. `W y_star`.
pub fn bootstrap_refit(weights: &OobWeightMatrix, y_star: &[f64]) -> Vec<Option<f64>> {
    weights.apply(y_star)
}

/// Bootstrap response `m_oob + eps*` for replicate `b`.
pub fn bootstrap_response(m_oob: &[f64], sigma2: f64, config: &BootstrapConfig, b: usize) -> Vec<f64> {
    let mut rng = stream(derive_seed(config.seed, b as u64));
    match config.noise {
        NoiseLaw::Normal => {
            let sd = sigma2.max(0.0).sqrt();
            if sd == 0.0 {
                return m_oob.to_vec();
            }
            let normal = Normal::new(0.0, sd).expect("finite non-negative sd");
            m_oob.iter().map(|m| m + normal.sample(&mut rng)).collect()
        }
    }
}

/// Monte Carlo correction term and its per-replicate terms.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEstimate {
    pub r_hat_b: f64,
    /// `(1/n_cov) sum_i (m_b(X_i) - m_oob(X_i))^2` for each replicate.
    pub replicate_terms: Vec<f64>,
}

impl BootstrapEstimate {
    /// Monte Carlo standard error of `r_hat_b`.
    pub fn standard_error(&self) -> f64 {
        let b = self.replicate_terms.len();
        if b < 2 {
            return f64::NAN;
        }
        let mean = self.r_hat_b;
        let var = self.replicate_terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    }
}

fn mean_covered(weights: &OobWeightMatrix, term: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in (0..weights.n()).filter(|&i| weights.is_covered(i)) {
        sum += term(i);
        count += 1;
    }
    sum / count as f64
}

/// Parametric bootstrap correction averaged over `config.replicates` draws.
pub fn r_hat_b(weights: &OobWeightMatrix, m_oob: &[f64], sigma2: f64, config: &BootstrapConfig) -> Result<BootstrapEstimate> {
    if config.replicates == 0 {
        return Err(Error::config("bootstrap needs at least one replicate"));
    }
    if weights.n_covered() == 0 {
        return Err(Error::estimation("no covered rows"));
    }
    let replicate_terms: Vec<f64> = (0..config.replicates)
        .into_par_iter()
        .map(|b| {
            let y_star = bootstrap_response(m_oob, sigma2, config, b);
            mean_covered(weights, |i| {
                let d = weights.row_dot(i, &y_star) - m_oob[i];
                d * d
            })
        })
        .collect();
    let r_hat_b = replicate_terms.iter().sum::<f64>() / replicate_terms.len() as f64;
    Ok(BootstrapEstimate { r_hat_b, replicate_terms })
}

/// Exact bootstrap expectation of the correction given the data:
/// `(1/n_cov) sum_i [((W m)_i - m_i)^2 + sigma2 * sum_j W_ij^2]`.
pub fn r_infinity(weights: &OobWeightMatrix, m_oob: &[f64], sigma2: f64) -> f64 {
    mean_covered(weights, |i| {
        let d = weights.row_dot(i, m_oob) - m_oob[i];
        d * d + sigma2 * weights.row_sum_squares(i)
    })
}

/// All estimators for one fitted forest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    #[serde(serialize_with = "serialize_f64")]
    pub sigma2_rf: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub sigma2_fast: f64,
    #[serde(serialize_with = "serialize_opt_f64")]
    pub sigma2_boot_mc: Option<f64>,
    #[serde(serialize_with = "serialize_f64")]
    pub sigma2_boot_closed: f64,
    #[serde(rename = "r_hat_B", serialize_with = "serialize_opt_f64")]
    pub r_hat_b: Option<f64>,
    #[serde(serialize_with = "serialize_f64")]
    pub r_infinity: f64,
    /// `sigma2_rf / a_n^2`.
    #[serde(serialize_with = "serialize_f64")]
    pub lower_bound: f64,
    pub n_covered: usize,
    #[serde(rename = "B")]
    pub replicates: usize,
    /// `sigma2_rf >= sigma2_fast >= sigma2_boot_closed`.
    pub ordering_ok: bool,
    /// `max(0, sigma2_boot_closed)`.
    #[serde(serialize_with = "serialize_f64")]
    pub clamped_boot: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub subsample_size: usize,
    #[serde(skip)]
    pub mc_standard_error: Option<f64>,
}

impl VarianceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `r_infinity / (sigma2_rf / a_n^2)`.
    pub fn bound_ratio(&self) -> f64 {
        self.r_infinity / self.lower_bound
    }
}

/// Intermediate OOB quantities shared by the estimators.
#[derive(Debug, Clone)]
pub struct OobFit {
    pub predictions: Vec<Option<f64>>,
    pub residuals: Residuals,
    pub sigma2_rf: f64,
    pub weights: OobWeightMatrix,
    /// OOB predictions with uncovered rows filled by the full-forest prediction.
    pub m_oob: Vec<f64>,
}

/// OOB predictions, residuals, `sigma2_rf` and the weight matrix.
pub fn oob_fit(forest: &Forest, data: &Dataset) -> Result<OobFit> {
    let routing = OobRouting::new(forest, data);
    let predictions = oob_predictions_routed(forest, &routing);
    let n = data.n_rows();
    let uncovered = predictions.iter().filter(|m| m.is_none()).count();
    if uncovered as f64 > MAX_UNCOVERED_FRACTION * n as f64 {
        return Err(Error::estimation(format!(
            "{uncovered} of {n} rows have no out-of-bag tree (limit {:.0}%); use more trees or a smaller subsample",
            MAX_UNCOVERED_FRACTION * 100.0
        )));
    }
    let residuals = oob_residuals(data, &predictions)?;
    let sigma2_rf = sigma2_rf(&residuals.values)?;
    let weights = oob_weight_matrix_routed(forest, &routing);
    let m_oob = fill_uncovered(&predictions, |i| forest.predict(data.row(i)));
    Ok(OobFit { predictions, residuals, sigma2_rf, weights, m_oob })
}

/// Runs every estimator and collects the results.
pub fn estimate_all(forest: &Forest, data: &Dataset, boot: &BootstrapConfig) -> Result<VarianceReport> {
    let fit = oob_fit(forest, data)?;
    report_from_fit(forest, data, &fit, boot)
}

pub fn report_from_fit(forest: &Forest, data: &Dataset, fit: &OobFit, boot: &BootstrapConfig) -> Result<VarianceReport> {
    let a_n = forest.subsample_size();
    let s2 = fit.sigma2_rf;
    let fast = sigma2_fast(s2, a_n);
    let r_inf = r_infinity(&fit.weights, &fit.m_oob, s2);
    let boot_closed = s2 - r_inf;
    let mc = if boot.replicates > 0 { Some(r_hat_b(&fit.weights, &fit.m_oob, s2, boot)?) } else { None };
    let a = a_n as f64;
    let lower_bound = s2 / (a * a);

    let n = data.n_rows();
    let mut warnings = Vec::new();
    if fit.residuals.n_uncovered > 0 {
        warnings.push(format!("{} of {n} rows have no out-of-bag tree and were excluded", fit.residuals.n_uncovered));
    }
    if boot_closed < 0.0 {
        warnings.push("sigma2_boot_closed is negative".to_string());
    }
    if let Some(mc) = &mc {
        if s2 - mc.r_hat_b < 0.0 {
            warnings.push("sigma2_boot_mc is negative".to_string());
        }
    }
    if r_inf < lower_bound {
        warnings.push(format!(
            "r_infinity is below sigma2_rf/a_n^2 (ratio {:.6}); a_n^2 = {} vs n = {n}",
            r_inf / lower_bound,
            a_n * a_n
        ));
    }

    Ok(VarianceReport {
        sigma2_rf: s2,
        sigma2_fast: fast,
        sigma2_boot_mc: mc.as_ref().map(|m| s2 - m.r_hat_b),
        sigma2_boot_closed: boot_closed,
        r_hat_b: mc.as_ref().map(|m| m.r_hat_b),
        r_infinity: r_inf,
        lower_bound,
        n_covered: fit.residuals.rows.len(),
        replicates: boot.replicates,
        ordering_ok: s2 >= fast && fast >= boot_closed,
        clamped_boot: boot_closed.max(0.0),
        warnings,
        subsample_size: a_n,
        mc_standard_error: mc.as_ref().map(BootstrapEstimate::standard_error),
    })
}
