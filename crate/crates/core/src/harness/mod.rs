//! Experiment harness: procedural datasets, fidelity metrics, the
//! `(m, epsilon)` sweep and its reports.

pub mod config;
pub mod datasets;
pub mod metrics;
pub mod report;
pub mod sweep;

pub use config::{build_artifacts, SweepFile};
pub use datasets::{make_public_pool, make_style_dataset, DatasetSpec, StyleDataset, StyleFamily};
pub use metrics::{mean_stderr, style_score, style_score_against, target_direction};
pub use report::{report, ReportFiles, ReportOptions};
pub use sweep::{
    run_baseline, run_cell, run_sweep, AdaptationPath, BaselineResult, CellStatus,
    ExperimentConfig, SweepArtifacts, SweepResult,
};
