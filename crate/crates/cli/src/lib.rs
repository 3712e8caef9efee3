//! Reproducible runs on top of `conet-core`: data generation, training,
//! evaluation and the comparison, λ-sweep, reduction and sparsity studies.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_compare, cmd_evaluate, cmd_generate, cmd_lambda_sweep, cmd_reduce_study, cmd_sparsity_report, cmd_train,
    load_dataset, prepare, CompareOutcome, GenerateManifest, ModelSummary, Prepared, TrainOutcome,
};
pub use config::{RunConfig, OUTPUT_DIR_ENV, RESOLVED_CONFIG};
