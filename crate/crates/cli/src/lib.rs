//! Dataset IO, TOML experiment configs, the seeded experiment runner and
//! report rendering for `dasvdd-core`.

pub mod config;
pub mod data;
pub mod experiment;
pub mod report;

pub use config::{
    ConfigError, DatasetSpec, ExperimentConfig, GammaSetting, InitName, Preprocess, TrainSection,
};
pub use data::{load_csv, load_idx, parse_csv, parse_idx_images, parse_idx_labels, DataError};
pub use experiment::{
    format_auc, percent, run_experiment, run_experiment_with, sweep, ExperimentError,
    ExperimentSummary, RunArtifacts, Stage, SweepError, SweepParam,
};
pub use report::{collect, render, Report, ReportError};
