//! Experiment orchestration: configuration, the round loop, benchmark
//! variants, metrics and persisted outputs.

mod config;
mod experiment;
mod output;
pub mod pipeline;
mod synthetic;

pub use config::{DatasetKind, ExperimentConfig, PartitionKind, DATA_ROOT_ENV};
pub use experiment::{evaluate, recovery_variant, run_experiment, ExperimentOutput, ParamRow, RoundLog, TraceRow};
pub use output::emit_outputs;
pub use pipeline::{FeelSimulation, PipelineConfig, RoundStats};
pub use synthetic::{simulate_chain, track_synthetic, TrackingRound};
