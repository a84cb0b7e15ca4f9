//! Synthetic additive regression models and the simulation studies run on them.

mod model;
mod plan;
mod sweep;

pub use model::{generate_dataset, Component, SimData, SimulationModel};
pub use plan::{ExperimentPlan, ForestTemplate, MConvergencePlan, SubsampleSchedule, THEORY_EXPONENT};
pub use sweep::{
    assemble, median, rep_seeds, run_consistency_sweep, run_m_convergence, run_ordering_study, run_rep,
    summarize_cell, write_m_convergence_csv, write_ordering_csv, write_reps_csv, CellSummary, EstimatorStats,
    ExperimentResult, MConvergenceRow, OrderingRow, OrderingStudy, RepRecord, RepSeeds, RuleOutcome,
    REP_CSV_COLUMNS,
};
