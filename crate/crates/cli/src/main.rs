mod args;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use oobvar::forest::{ForestParams, SubsampleRule};
use oobvar::oob::oob_weight_matrix;
use oobvar::sim::{
    run_consistency_sweep, run_m_convergence, run_ordering_study, write_m_convergence_csv, write_ordering_csv,
    write_reps_csv, ExperimentPlan, ForestTemplate, MConvergencePlan, SimulationModel, SubsampleSchedule,
};
use oobvar::{build_forest, estimate_all, BootstrapConfig, Dataset, Error, Resampling};

use args::{BootArgs, Cli, Command, FitArgs, ForestArgs, MconvArgs, ModelArgs, ModelKind, Schedule, SimArgs};

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Estimation(_) => 3,
        Error::Input(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(3);
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Ordering(a) => cmd_ordering(a),
        Command::Mconv(a) => cmd_mconv(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn resampling(forest: &ForestArgs) -> Resampling {
    if forest.with_replacement {
        Resampling::WithReplacement
    } else {
        Resampling::WithoutReplacement
    }
}

fn boot_config(boot: &BootArgs) -> BootstrapConfig {
    BootstrapConfig { replicates: boot.boot_reps, seed: boot.boot_seed, ..Default::default() }
}

fn write_file(path: &Path, contents: &str) -> oobvar::Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> oobvar::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn cmd_fit(a: &FitArgs) -> oobvar::Result<()> {
    let file = File::open(&a.input)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", a.input.display())))?;
    let data = Dataset::from_csv(file, &a.target)?;
    let subsample = match (a.subsample_size, a.subsample_frac) {
        (Some(size), _) => Some(SubsampleRule::Size(size)),
        (None, Some(frac)) => Some(SubsampleRule::Fraction(frac)),
        (None, None) => None,
    };
    let params = ForestParams {
        num_trees: a.forest.trees.unwrap_or(500),
        mtry: a.forest.mtry,
        subsample,
        max_leaves: a.forest.max_leaves,
        min_leaf_size: a.forest.min_leaf,
        resampling: resampling(&a.forest),
        master_seed: a.forest.seed,
    };
    let config = params.resolve(data.n_rows(), data.n_features())?;
    let forest = build_forest(&data, &config)?;
    let report = estimate_all(&forest, &data, &boot_config(&a.boot))?;

    if let Some(path) = &a.forest_output {
        write_file(path, &forest.to_json()?)?;
    }
    if let Some(path) = &a.weights_output {
        oob_weight_matrix(&forest, &data).write_csv(create(path)?)?;
    }
    let json = report.to_json()? + "\n";
    match &a.output {
        Some(path) => write_file(path, &json)?,
        None => io::stdout().write_all(json.as_bytes())?,
    }
    Ok(())
}

fn model(m: &ModelArgs) -> oobvar::Result<SimulationModel> {
    match m.model {
        ModelKind::Zero => SimulationModel::zero(m.p, m.sigma),
        ModelKind::Canonical => {
            let canonical = SimulationModel::canonical();
            SimulationModel::new(canonical.name, canonical.components, m.sigma)
        }
    }
}

fn schedule(s: Schedule) -> SubsampleSchedule {
    match s {
        Schedule::Practical => SubsampleSchedule::Practical,
        Schedule::Theory => SubsampleSchedule::Theory,
    }
}

fn template(forest: &ForestArgs) -> ForestTemplate {
    ForestTemplate {
        num_trees: forest.trees.unwrap_or(300),
        mtry: forest.mtry,
        max_leaves: forest.max_leaves,
        min_leaf_size: forest.min_leaf,
        resampling: resampling(forest),
    }
}

fn plan(a: &SimArgs) -> oobvar::Result<ExperimentPlan> {
    Ok(ExperimentPlan {
        model: model(&a.model)?,
        n_grid: a.n_grid.clone(),
        reps: a.reps,
        forest: template(&a.forest),
        schedule: schedule(a.schedule),
        boot: boot_config(&a.boot),
        plan_seed: a.forest.seed,
    })
}

fn ensure_dir(dir: &Path) -> oobvar::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

fn cmd_simulate(a: &SimArgs) -> oobvar::Result<()> {
    let plan = plan(a)?;
    plan.validate()?;
    ensure_dir(&a.output)?;
    let result = run_consistency_sweep(&plan)?;
    write_reps_csv(&result.records, create(&a.output.join("reps.csv"))?)?;
    write_file(&a.output.join("summary.json"), &(serde_json::to_string_pretty(&result)? + "\n"))?;
    for rule in &result.rules {
        eprintln!("{} {}: {}", if rule.passed { "PASS" } else { "FAIL" }, rule.rule, rule.detail);
    }
    Ok(())
}

fn cmd_ordering(a: &SimArgs) -> oobvar::Result<()> {
    let plan = plan(a)?;
    plan.validate()?;
    ensure_dir(&a.output)?;
    let study = run_ordering_study(&plan)?;
    write_reps_csv(&study.experiment.records, create(&a.output.join("reps.csv"))?)?;
    write_ordering_csv(&study.rows, create(&a.output.join("ordering.csv"))?)?;
    write_file(&a.output.join("ordering.json"), &(serde_json::to_string_pretty(&study)? + "\n"))?;
    for rule in &study.rules {
        eprintln!("{} {}: {}", if rule.passed { "PASS" } else { "FAIL" }, rule.rule, rule.detail);
    }
    Ok(())
}

fn cmd_mconv(a: &MconvArgs) -> oobvar::Result<()> {
    let plan = MConvergencePlan {
        model: model(&a.model)?,
        n: a.n,
        m_grid: a.m_grid.clone(),
        reps: a.reps,
        forest: template(&a.forest),
        schedule: schedule(a.schedule),
        probe_row: a.probe_row,
        seed: a.forest.seed,
    };
    plan.validate()?;
    ensure_dir(&a.output)?;
    let rows = run_m_convergence(&plan)?;
    write_m_convergence_csv(&rows, create(&a.output.join("mconv.csv"))?)?;
    write_file(&a.output.join("mconv.json"), &(serde_json::to_string_pretty(&rows)? + "\n"))?;
    Ok(())
}
