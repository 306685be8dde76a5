//! File formats, reports, and the command-line driver for `riskstop-core`.
//!
//! Trace sets live in a JSON-lines file with a binary embedding sidecar,
//! PCA models in a small binary container, and probes and calibrations in
//! JSON. See the `riskstop` binary for the end-to-end commands.

pub mod artifact;
pub mod cli;
pub mod coverage;
pub mod error;
pub mod pca_file;
pub mod protocol;
pub mod report;
pub mod traces;

pub use error::{Error, Result};
