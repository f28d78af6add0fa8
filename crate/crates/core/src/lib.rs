//! Statistical plasmode data generation.
//!
//! Covariate rows are resampled from a real dataset, outcomes are generated
//! from an investigator-chosen outcome-generating model, and competing
//! regression methods are evaluated against that known truth.
//!
//! The crate is organised along the pipeline:
//!
//! * [`dataio`]: loading, splitting and persisting numeric tables.
//! * [`resampler`]: seeded covariate replicates (bootstrap, m-out-of-n, subsampling).
//! * [`covshrink`]: sample and Ledoit-Wolf shrinkage covariance, matrix norms.
//! * [`mselect`]: adaptive choice of the resampling size `m`.
//! * [`regress`]: ridge, LASSO and variance-components mixed model fitters.
//! * [`ogm`]: effect specifications, outcome generation and quality checks.
//! * [`harness`]: performance measures, convergence traces, and the staged pipeline.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covshrink;
pub mod dataio;
pub mod harness;
pub mod linalg;
pub mod mselect;
pub mod ogm;
pub mod regress;
pub mod resampler;
pub mod rng;
pub mod svg;

pub use dataio::{Dataset, SplitResult};
pub use harness::{EvaluationReport, PipelineConfig};
pub use mselect::{MSelectionConfig, MSelectionResult};
pub use ogm::{EffectSpec, QualityReport};
pub use regress::{CvSpec, FitResult};
pub use resampler::{Replicate, ResamplingPlan, Scheme};
