//! Multi-seed experiment protocols: data sufficiency, distribution misalignment
//! and validation-size robustness.

mod plan;
mod run;

pub use plan::{ExperimentPlan, Scenario, DEFAULT_SEEDS, SUFFICIENCY_LEVELS};
pub use run::{
    base_split, flips_table, fraction_label, mean_std, run_misaligned, run_plan, run_robustness,
    run_sufficiency_sweep, runs_table, summary_table, validation_label, ExperimentOutcome, Method,
    MetricsSummary, RunRecord, FULL_VALIDATION, MISALIGNED, TARGET_RATIOS,
};
