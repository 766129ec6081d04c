//! Experiment harness: configuration, replication loop and output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, ExperimentKind, ExperimentSpec, OutputFormat, TreeMode};
pub use output::{emit_results, to_csv, to_json};
pub use run::{run_experiment, run_experiment_with_jobs, CellSummary, Check, ExperimentRecord, Row};
