//! Experiment orchestration: multi-seed training runs, pooled evaluation,
//! plot-ready curves and the invariant suite behind the `check` command.

pub mod check;
mod evaluate;
mod run;

pub use check::{format_checks, run_checks, CheckOutcome};
pub use evaluate::{
    action_distribution, actions_to_csv, curves_to_csv, evaluate, improvement_pct, load_runs,
    ActionPoint, Comparison, EvaluationReport, ModeReport, SeedComparison, Summary,
};
pub use run::{metrics_file_name, metrics_path, run_experiment, train_run, RunOptions, RunRecord};
