//! Config-driven experiment runner: generate or load data, grid-search each
//! method per repetition, evaluate on the test split and write reports.

pub mod config;
pub mod error;
pub mod reference;
pub mod report;
pub mod runner;

pub use config::{DatasetSpec, ExperimentConfig, Method, Overrides};
pub use error::{CliError, CliResult};
pub use reference::{compare_to_reference, ReferenceTables};
pub use report::{report_sparsity, Metric, MetricsReport, SparsityRecord};
pub use runner::{run, RunOutput};
