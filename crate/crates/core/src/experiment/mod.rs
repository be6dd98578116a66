//! Named, configured and persisted experiments, and the claim matrix built from them.

pub mod born;
pub mod config;
pub mod record;
pub mod runner;
pub mod verify;

pub use born::{born_rule_setup, BornSetup};
pub use config::{EngineConfig, ExperimentConfig, ExperimentKind, ExperimentParams};
pub use record::{Check, Metric, ResultRecord, RunManifest, Series};
pub use runner::{persist, run_experiment, run_to_dir};
pub use verify::{load_record, verify_claims, ClaimRow, ClaimStatus};
