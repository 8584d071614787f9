//! Command-line front end for the `entrokit` entropy estimators.

pub mod config;
pub mod ingest;
pub mod run;

pub use config::{Cli, RunConfig};
pub use ingest::{ingest_csv, read_dataset, write_dataset};
pub use run::{run, run_to, RunError};
