//! Reference systems, metrics and batched seeded experiments.

pub mod experiment;
pub mod metrics;
pub mod systems;

pub use experiment::{
    perturb_model, run_experiment, run_seed, sample_points, ExperimentConfig, ResultTable,
    RunOutcome, RunRecord, TargetSpec,
};
pub use metrics::{error_metrics, rrmse, Summary};
pub use systems::{builtin_system, collinearity, generate_system, SyntheticSpec, BUILTIN_NAMES};
