//! Command-line workflows: file formats, microdata ingestion and the
//! per-mode pipelines behind the `icin` binary.

pub mod args;
pub mod files;
pub mod format;
pub mod microdata;
pub mod run;

pub use args::{Cli, Command};
pub use files::{counts_to_json, observed_to_json, parse_table, Table};
pub use microdata::{aggregate, read_bivariate, read_categorical, CategoricalData, ReadOptions, Schema};
pub use run::{replay, run, Manifest, Mode, RunConfig, RunOutcome};
