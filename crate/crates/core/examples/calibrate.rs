//! Prints consistency-sweep summaries for the canonical additive model.
//!
//! `cargo run --release -p oobvar --example calibrate -- <reps> <plan_seed> [n ...]`

use std::time::Instant;

use oobvar::sim::{run_consistency_sweep, ExperimentPlan, ForestTemplate, SimulationModel, SubsampleSchedule};
use oobvar::BootstrapConfig;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let reps = args.first().and_then(|s| s.parse().ok()).unwrap_or(20);
    let plan_seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut n_grid: Vec<usize> = args.iter().skip(2).filter_map(|s| s.parse().ok()).collect();
    if n_grid.is_empty() {
        n_grid = vec![200, 800, 3200];
    }
    let plan = ExperimentPlan {
        model: SimulationModel::canonical(),
        n_grid,
        reps,
        forest: ForestTemplate { num_trees: 300, ..Default::default() },
        schedule: SubsampleSchedule::Practical,
        boot: BootstrapConfig::default(),
        plan_seed,
    };
    let start = Instant::now();
    let result = run_consistency_sweep(&plan).expect("sweep");
    for c in &result.cells {
        let rf = c.sigma2_rf.as_ref().unwrap();
        let boot = c.sigma2_boot_closed.as_ref().unwrap();
        println!(
            "n={:5} a_n={:5} rf: mean={:.4} median|bias|={:.4} sd={:.4}  boot_closed: mean={:.4} median|bias|={:.4}",
            c.n, c.a_n, rf.mean, rf.median_abs_bias, rf.sd, boot.mean, boot.median_abs_bias
        );
    }
    for r in &result.rules {
        println!("{:55} {} ({})", r.rule, r.passed, r.detail);
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
}
