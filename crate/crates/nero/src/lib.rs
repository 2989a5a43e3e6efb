//! File formats, parallel drivers and the command-line front end for the
//! `nero-core` detector.
//!
//! Bundles live in directories holding a `manifest.json` and headerless CSV
//! tensors ([`bundle_io`]); fitted detectors are JSON files keyed to the
//! final layer they were fit on ([`model_file`]). [`commands`] implements
//! each CLI verb as a library function so the whole pipeline can be driven
//! from tests as well as from the `nero` binary.

pub mod bundle_io;
pub mod cli;
pub mod commands;
pub mod config;
mod csv_io;
pub mod dataset_io;
mod error;
pub mod model_file;
pub mod parallel;
pub mod report;

pub use bundle_io::{load_bundle, write_bundle};
pub use error::{Error, Result, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};
pub use nero_core;
