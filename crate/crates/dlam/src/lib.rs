//! File formats, event-log ingestion, experiment plumbing and the command
//! line around `dlam-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod format;
pub mod ingest;
pub mod output;

pub use error::{Error, FormatError, Result};
