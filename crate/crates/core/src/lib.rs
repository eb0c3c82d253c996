//! Interval type-2 TSK fuzzy neural network with sliding-mode online learning.
//!
//! The network ([`network`]) uses Gaussian antecedents with an uncertain
//! width ([`mf`]) on a full rule grid and affine rule consequents. Two online
//! learners adapt every parameter one sample at a time: the sliding-mode
//! learner in [`smc`] and the gradient-descent baseline in [`gd`]. The
//! [`plants`] module provides the benchmark systems and [`harness`] runs
//! seeded identification experiments on them.

// Negated comparisons are how NaN gets rejected alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod gd;
pub mod harness;
pub mod io;
pub mod mf;
pub mod network;
pub mod plants;
pub mod smc;

pub use config::{parse_config, serialize_config, ExperimentConfig, LearnerKind, PlantKind};
pub use error::{Error, Result};
pub use gd::{gd_gradients, gd_step, GdLearner, GdParams};
pub use harness::{build_regressor, rmse, run_experiment, ExperimentReport};
pub use mf::{eval_mf, Type2GaussianMF};
pub use network::{infer, InferenceCache, NetworkState, RuleConsequent};
pub use smc::{smc_step, SmcLearner, SmcParams, StabilityBounds, StepDiagnostics};
