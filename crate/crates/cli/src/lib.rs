//! File-based front end for `pcskel_core`: dataset generation, skeleton
//! discovery with a JSON run report, CPDAG orientation and a benchmark
//! harness. The `pcskel` binary is a thin argument parser over
//! [`commands`].

pub mod commands;
pub mod error;
pub mod formats;
pub mod report;

pub use error::CliError;
