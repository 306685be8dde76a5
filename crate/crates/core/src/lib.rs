//! Risk-controlled early stopping for step-wise sequential generation.
//!
//! The crate is `no_std` (with `alloc`) and purely computational: it holds the
//! trace data model, featurization (PCA and causal smoothing), linear probes,
//! binomial-tail fixed-sequence calibration, the online stopping monitor, a
//! synthetic reasoning-graph simulator, and the evaluation curves built on
//! top of them. File formats and the command-line driver live in the
//! `riskstop` companion crate.
//!
//! A typical offline pipeline:
//!
//! 1. [`pca::fit_pca`] on training-split step embeddings.
//! 2. [`probe::train_probe`] for each probe kind the score mode needs.
//! 3. [`calibrate::calibrate_fixed_sequence`] on the calibration split to
//!    pick a threshold with a finite-sample family-wise error guarantee.
//! 4. [`monitor::MonitorState`] to apply the threshold online.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod binomial;
pub mod calibrate;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod monitor;
pub mod pca;
pub mod probe;
pub mod risk;
pub mod scorer;
pub mod segment;
pub mod sim;
pub mod smooth;
pub mod trace;

mod linalg;

pub use error::{Error, Result};
