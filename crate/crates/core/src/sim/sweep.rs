//! Simulation studies: consistency sweeps, estimator orderings and tree-count
//! convergence. Each (cell, rep) job derives its seeds from the plan seed and
//! its indices alone, so jobs run in parallel and results come back in order.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::model::generate_dataset;
use super::plan::{ExperimentPlan, MConvergencePlan, SubsampleSchedule};
use crate::error::Result;
use crate::forest::build_forest;
use crate::json::fmt_f64_cell;
use crate::oob::oob_predictions;
use crate::rng::derive_seed;
use crate::variance::{estimate_all, oob_residuals, sigma2_rf, BootstrapConfig, VarianceReport};

/// Seeds of one replicate: data, forest and bootstrap streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepSeeds {
    pub data: u64,
    pub forest: u64,
    pub bootstrap: u64,
}

pub fn rep_seeds(plan_seed: u64, cell: usize, rep: usize, boot_seed: u64) -> RepSeeds {
    let base = derive_seed(derive_seed(plan_seed, cell as u64), rep as u64);
    RepSeeds {
        data: derive_seed(base, 0),
        forest: derive_seed(base, 1),
        bootstrap: derive_seed(derive_seed(base, 2), boot_seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub cell: usize,
    pub n: usize,
    pub num_trees: usize,
    pub a_n: usize,
    pub rep: usize,
    pub sigma2_true: f64,
    pub report: Option<VarianceReport>,
    pub error: Option<String>,
}

/// Runs one replicate of one cell.
pub fn run_rep(plan: &ExperimentPlan, cell: usize, rep: usize) -> RepRecord {
    let n = plan.n_grid[cell];
    let a_n = plan.subsample_size(n);
    let seeds = rep_seeds(plan.plan_seed, cell, rep, plan.boot.seed);
    let outcome = (|| -> Result<VarianceReport> {
        let sim = generate_dataset(&plan.model, n, seeds.data)?;
        let cfg = plan.forest.resolve(n, plan.model.p(), a_n, seeds.forest)?;
        let forest = build_forest(&sim.dataset, &cfg)?;
        let boot = BootstrapConfig { seed: seeds.bootstrap, ..plan.boot.clone() };
        estimate_all(&forest, &sim.dataset, &boot)
    })();
    let (report, error) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    RepRecord { cell, n, num_trees: plan.forest.num_trees, a_n, rep, sigma2_true: plan.model.sigma2(), report, error }
}

/// Error summaries of one estimator over the successful reps of a cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorStats {
    pub mean: f64,
    pub mean_bias: f64,
    pub median_bias: f64,
    pub median_abs_bias: f64,
    pub mse: f64,
    /// Sample standard deviation across reps.
    pub sd: f64,
}

impl EstimatorStats {
    pub fn from_values(values: &[f64], truth: f64) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let bias: Vec<f64> = values.iter().map(|v| v - truth).collect();
        let abs_bias: Vec<f64> = bias.iter().map(|b| b.abs()).collect();
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            f64::NAN
        };
        Self {
            mean,
            mean_bias: mean - truth,
            median_bias: median(&bias),
            median_abs_bias: median(&abs_bias),
            mse: bias.iter().map(|b| b * b).sum::<f64>() / k,
            sd,
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Per-cell aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    pub n: usize,
    pub a_n: usize,
    pub num_trees: usize,
    pub reps_ok: usize,
    pub failed: bool,
    pub errors: Vec<String>,
    pub sigma2_rf: Option<EstimatorStats>,
    pub sigma2_fast: Option<EstimatorStats>,
    pub sigma2_boot_closed: Option<EstimatorStats>,
    pub sigma2_boot_mc: Option<EstimatorStats>,
    pub freq_rf_ge_fast: f64,
    pub freq_fast_ge_boot_closed: f64,
    pub min_bound_ratio: f64,
    pub median_bound_ratio: f64,
}

/// Named pass/fail outcome of one check over the whole experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleOutcome {
    pub rule: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub model: super::model::SimulationModel,
    pub schedule: SubsampleSchedule,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub bootstrap_replicates: usize,
    pub plan_seed: u64,
    #[serde(skip)]
    pub records: Vec<RepRecord>,
    pub cells: Vec<CellSummary>,
    pub rules: Vec<RuleOutcome>,
}

/// Summarises the records of one cell.
pub fn summarize_cell(cell: usize, records: &[RepRecord]) -> CellSummary {
    let first = &records[0];
    let ok: Vec<&VarianceReport> = records.iter().filter_map(|r| r.report.as_ref()).collect();
    let truth = first.sigma2_true;
    let stats = |f: &dyn Fn(&VarianceReport) -> Option<f64>| -> Option<EstimatorStats> {
        let values: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
        (!values.is_empty()).then(|| EstimatorStats::from_values(&values, truth))
    };
    let freq = |pred: &dyn Fn(&VarianceReport) -> bool| -> f64 {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().filter(|r| pred(r)).count() as f64 / ok.len() as f64
        }
    };
    let ratios: Vec<f64> = ok.iter().map(|r| r.bound_ratio()).collect();
    CellSummary {
        cell,
        n: first.n,
        a_n: first.a_n,
        num_trees: first.num_trees,
        reps_ok: ok.len(),
        failed: ok.len() < records.len(),
        errors: records.iter().filter_map(|r| r.error.clone()).collect(),
        sigma2_rf: stats(&|r| Some(r.sigma2_rf)),
        sigma2_fast: stats(&|r| Some(r.sigma2_fast)),
        sigma2_boot_closed: stats(&|r| Some(r.sigma2_boot_closed)),
        sigma2_boot_mc: stats(&|r| r.sigma2_boot_mc),
        freq_rf_ge_fast: freq(&|r| r.sigma2_rf >= r.sigma2_fast),
        freq_fast_ge_boot_closed: freq(&|r| r.sigma2_fast >= r.sigma2_boot_closed),
        min_bound_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        median_bound_ratio: median(&ratios),
    }
}

fn evaluate_rules(plan: &ExperimentPlan, records: &[RepRecord], cells: &[CellSummary]) -> Vec<RuleOutcome> {
    let ok: Vec<(&RepRecord, &VarianceReport)> =
        records.iter().filter_map(|r| r.report.as_ref().map(|rep| (r, rep))).collect();
    let mut rules = Vec::new();

    let failed = records.iter().filter(|r| r.error.is_some()).count();
    rules.push(RuleOutcome {
        rule: "no_failed_reps".into(),
        passed: failed == 0,
        detail: format!("{failed} of {} reps failed", records.len()),
    });

    let rf_fast = ok.iter().filter(|(_, r)| r.sigma2_rf >= r.sigma2_fast).count();
    rules.push(RuleOutcome {
        rule: "sigma2_rf_ge_sigma2_fast".into(),
        passed: rf_fast == ok.len(),
        detail: format!("{rf_fast} of {} reps", ok.len()),
    });

    let eligible: Vec<_> = ok.iter().filter(|(rec, _)| rec.a_n * rec.a_n >= rec.n).collect();
    let fast_boot = eligible.iter().filter(|(_, r)| r.sigma2_fast >= r.sigma2_boot_closed).count();
    rules.push(RuleOutcome {
        rule: "sigma2_fast_ge_sigma2_boot_closed_when_a_n_ge_sqrt_n".into(),
        passed: fast_boot == eligible.len(),
        detail: format!("{fast_boot} of {} eligible reps", eligible.len()),
    });

    let medians: Vec<f64> =
        cells.iter().map(|c| c.sigma2_rf.as_ref().map_or(f64::NAN, |s| s.median_abs_bias)).collect();
    rules.push(RuleOutcome {
        rule: "median_abs_bias_sigma2_rf_strictly_decreasing".into(),
        passed: medians.windows(2).all(|w| w[1] < w[0]),
        detail: format!("{medians:?}"),
    });

    if plan.schedule == SubsampleSchedule::Theory {
        let ratios: Vec<f64> = cells.iter().map(|c| (c.a_n * c.a_n) as f64 / c.n as f64).collect();
        rules.push(RuleOutcome {
            rule: "a_n_squared_over_n_decreasing".into(),
            passed: ratios.windows(2).all(|w| w[1] < w[0]),
            detail: format!("{ratios:?}"),
        });
    }
    rules
}

/// Runs every (cell, rep) of the plan and aggregates per cell.
pub fn run_consistency_sweep(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..plan.n_grid.len()).flat_map(|c| (0..plan.reps).map(move |r| (c, r))).collect();
    let records: Vec<RepRecord> = jobs.par_iter().map(|&(c, r)| run_rep(plan, c, r)).collect();
    Ok(assemble(plan, records))
}

/// Rebuilds summaries and rules from stored records.
pub fn assemble(plan: &ExperimentPlan, records: Vec<RepRecord>) -> ExperimentResult {
    let cells: Vec<CellSummary> = (0..plan.n_grid.len())
        .map(|c| {
            let own: Vec<RepRecord> = records.iter().filter(|r| r.cell == c).cloned().collect();
            summarize_cell(c, &own)
        })
        .collect();
    let rules = evaluate_rules(plan, &records, &cells);
    ExperimentResult {
        model: plan.model.clone(),
        schedule: plan.schedule,
        n_grid: plan.n_grid.clone(),
        reps: plan.reps,
        bootstrap_replicates: plan.boot.replicates,
        plan_seed: plan.plan_seed,
        records,
        cells,
        rules,
    }
}

pub const REP_CSV_COLUMNS: [&str; 12] = [
    "n",
    "M",
    "a_n",
    "rep",
    "sigma2_true",
    "sigma2_rf",
    "sigma2_fast",
    "sigma2_boot_mc",
    "sigma2_boot_closed",
    "r_hat_B",
    "r_infinity",
    "n_covered",
];

fn opt_cell(x: Option<f64>) -> String {
    x.map(fmt_f64_cell).unwrap_or_default()
}

/// One row per replicate; failed replicates leave the estimator cells empty.
pub fn write_reps_csv<W: Write>(records: &[RepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REP_CSV_COLUMNS)?;
    for rec in records {
        let r = rec.report.as_ref();
        w.write_record([
            rec.n.to_string(),
            rec.num_trees.to_string(),
            rec.a_n.to_string(),
            rec.rep.to_string(),
            fmt_f64_cell(rec.sigma2_true),
            opt_cell(r.map(|r| r.sigma2_rf)),
            opt_cell(r.map(|r| r.sigma2_fast)),
            opt_cell(r.and_then(|r| r.sigma2_boot_mc)),
            opt_cell(r.map(|r| r.sigma2_boot_closed)),
            opt_cell(r.and_then(|r| r.r_hat_b)),
            opt_cell(r.map(|r| r.r_infinity)),
            r.map(|r| r.n_covered.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Ordering outcomes of one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingRow {
    pub n: usize,
    pub a_n: usize,
    pub reps_ok: usize,
    pub freq_rf_ge_fast: f64,
    pub freq_fast_ge_boot_closed: f64,
    pub min_bound_ratio: f64,
    pub median_bound_ratio: f64,
    /// Whether `a_n >= sqrt(n)`, under which `fast >= boot_closed` is guaranteed.
    pub bound_guaranteed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingStudy {
    pub rows: Vec<OrderingRow>,
    pub rules: Vec<RuleOutcome>,
    #[serde(skip)]
    pub experiment: ExperimentResult,
}

pub fn run_ordering_study(plan: &ExperimentPlan) -> Result<OrderingStudy> {
    let experiment = run_consistency_sweep(plan)?;
    let rows = experiment
        .cells
        .iter()
        .map(|c| OrderingRow {
            n: c.n,
            a_n: c.a_n,
            reps_ok: c.reps_ok,
            freq_rf_ge_fast: c.freq_rf_ge_fast,
            freq_fast_ge_boot_closed: c.freq_fast_ge_boot_closed,
            min_bound_ratio: c.min_bound_ratio,
            median_bound_ratio: c.median_bound_ratio,
            bound_guaranteed: c.a_n * c.a_n >= c.n,
        })
        .collect();
    let rules = experiment.rules.iter().filter(|r| r.rule.starts_with("sigma2_") || r.rule == "no_failed_reps").cloned().collect();
    Ok(OrderingStudy { rows, rules, experiment })
}

pub fn write_ordering_csv<W: Write>(rows: &[OrderingRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "a_n",
        "reps_ok",
        "freq_rf_ge_fast",
        "freq_fast_ge_boot_closed",
        "min_bound_ratio",
        "median_bound_ratio",
        "bound_guaranteed",
    ])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.a_n.to_string(),
            r.reps_ok.to_string(),
            fmt_f64_cell(r.freq_rf_ge_fast),
            fmt_f64_cell(r.freq_fast_ge_boot_closed),
            fmt_f64_cell(r.min_bound_ratio),
            fmt_f64_cell(r.median_bound_ratio),
            r.bound_guaranteed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Spread across independent forests at one tree count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MConvergenceRow {
    pub num_trees: usize,
    pub reps: usize,
    pub sd_sigma2_rf: f64,
    pub mean_probe: f64,
    pub sd_probe: f64,
    /// RMS difference of the OOB prediction vectors of reps 0 and 1 over rows
    /// covered in both.
    pub rms_pair_diff: f64,
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt()
}

/// Fixes one dataset and, for each tree count, fits `reps` independently
/// seeded forests to measure how much OOB quantities still fluctuate.
pub fn run_m_convergence(plan: &MConvergencePlan) -> Result<Vec<MConvergenceRow>> {
    plan.validate()?;
    let sim = generate_dataset(&plan.model, plan.n, derive_seed(plan.seed, 0))?;
    let data = &sim.dataset;
    let a_n = plan.schedule.subsample_size(plan.n);
    plan.m_grid
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let template = super::plan::ForestTemplate { num_trees: m, ..plan.forest.clone() };
            let fits: Vec<(Vec<Option<f64>>, Option<f64>)> = (0..plan.reps)
                .into_par_iter()
                .map(|r| -> Result<_> {
                    let master = derive_seed(derive_seed(plan.seed, 1 + k as u64), r as u64);
                    let cfg = template.resolve(plan.n, plan.model.p(), a_n, master)?;
                    let forest = build_forest(data, &cfg)?;
                    let preds = oob_predictions(&forest, data);
                    let s2 = oob_residuals(data, &preds).and_then(|res| sigma2_rf(&res.values)).ok();
                    Ok((preds, s2))
                })
                .collect::<Result<_>>()?;
            let probes: Vec<f64> = fits.iter().filter_map(|(p, _)| p[plan.probe_row]).collect();
            let s2: Vec<f64> = fits.iter().filter_map(|(_, s)| *s).collect();
            let (a, b) = (&fits[0].0, &fits[1].0);
            let diffs: Vec<f64> =
                a.iter().zip(b).filter_map(|(x, y)| Some((x.as_ref()? - y.as_ref()?).powi(2))).collect();
            Ok(MConvergenceRow {
                num_trees: m,
                reps: plan.reps,
                sd_sigma2_rf: sample_sd(&s2),
                mean_probe: probes.iter().sum::<f64>() / probes.len() as f64,
                sd_probe: sample_sd(&probes),
                rms_pair_diff: (diffs.iter().sum::<f64>() / diffs.len() as f64).sqrt(),
            })
        })
        .collect()
}

pub fn write_m_convergence_csv<W: Write>(rows: &[MConvergenceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["M", "reps", "sd_sigma2_rf", "mean_probe", "sd_probe", "rms_pair_diff"])?;
    for r in rows {
        w.write_record([
            r.num_trees.to_string(),
            r.reps.to_string(),
            fmt_f64_cell(r.sd_sigma2_rf),
            fmt_f64_cell(r.mean_probe),
            fmt_f64_cell(r.sd_probe),
            fmt_f64_cell(r.rms_pair_diff),
        ])?;
    }
    w.flush()?;
    Ok(())
}
