//! Configuration, checkpoints and experiment orchestration.

pub mod checkpoint;
pub mod config;
pub mod run;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, Snapshot};
pub use config::{parse_config, parse_with_overrides, ExperimentConfig, Mode, Overrides, ResolvedConfig};
pub use run::{run, run_convergence_study, Outcome, Setup};
