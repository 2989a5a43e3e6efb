//! Post-hoc out-of-distribution scoring from neuron-level relevance.
//!
//! Everything in this crate is pure computation over in-memory data and
//! builds without `std`; file formats, the CLI and parallel drivers live in
//! the companion `nero` crate.
//!
//! The pipeline:
//!
//! 1. [`relevance`] attributes each logit of the final linear layer back to
//!    the penultimate neurons and the bias neuron.
//! 2. [`subspace`] fits a PCA projection over the training relevance matrix.
//! 3. [`detector`] builds class centroids in that subspace, calibrates the
//!    bias-relevance weight and scores new samples.
//! 4. [`metrics`] turns ID/OOD score arrays into AUROC and FPR95.
//!
//! [`baselines`] holds the classical logit and feature scores used for
//! comparison, and [`synth`] generates seeded toy problems with a small
//! trained network so the full pipeline can run without an external ML stack.
#![no_std]
#![warn(rust_2018_idioms, unused_qualifications)]
// `!(x > 0.0)` style guards are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod baselines;
pub mod bundle;
pub mod detector;
mod error;
pub mod linalg;
pub mod metrics;
pub mod relevance;
pub mod subspace;
pub mod synth;

pub use bundle::{ArtifactBundle, SplitTag};
pub use detector::{LambdaMode, NeroConfig, NeroModel, NormMode, ScoreBreakdown};
pub use error::Error;
pub use linalg::Matrix;
pub use relevance::{RelevanceBatch, RelevanceResult, YMode};
pub use subspace::{Projection, ZSpec};

pub type Result<T, E = Error> = core::result::Result<T, E>;
