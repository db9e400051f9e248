//! Experiment orchestration for test-time graph transformation: scenario
//! configs, seeded runs, ablation grids, cross-backbone transfer and
//! report files.

pub mod ablation;
pub mod config;
pub mod experiment;
pub mod report;
pub mod transfer;

pub use ablation::{ablation, AblationResult, Axis};
pub use config::{DataSource, ExperimentConfig, Scenario};
pub use experiment::{run_experiment, run_experiment_with, ExperimentResult, SeedRow};
pub use report::{emit_ablation, emit_report, emit_transfer};
pub use transfer::{cross_architecture, TransferMatrix};
