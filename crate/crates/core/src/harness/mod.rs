//! Function catalog, experiment configuration, batch runs and reports.

pub mod catalog;
pub mod config;
pub mod experiment;
pub mod report;
pub mod svg;
pub mod verify;

pub use catalog::{default_catalog, CatalogFunction, CatalogKind};
pub use config::{ExperimentConfig, TimeGrid};
pub use experiment::{run_experiment, run_experiment_with, ExperimentReport, ExperimentRow, Quantities, RatioKind};
pub use verify::{verify, Fault, Suite, VerifyReport};
