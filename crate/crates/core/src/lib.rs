//! Clinical triage modelling on sparse laboratory-exam tables.
//!
//! The crate covers the whole modelling path: table ingestion and summaries
//! ([`dataset`]), missing-value handling ([`impute`]), minority oversampling
//! ([`rebalance`]), sparsity-aware boosted trees ([`trees`]), screening
//! baselines ([`baselines`]), Gaussian-process Bayesian tuning ([`tune`]),
//! metrics and calibration ([`eval`]), exact tree Shapley attributions
//! ([`explain`]), and the versioned model artifact ([`artifact`]).

pub mod artifact;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod folds;
pub mod impute;
pub mod linalg;
pub mod matrix;
pub mod pipeline;
pub mod rebalance;
pub mod trees;
pub mod tune;

pub use dataset::{FeatureKind, FeatureSpec, RecordTable, SyntheticSpec};
pub use error::{Result, TriageError};
pub use eval::Task;
pub use matrix::{is_missing, Matrix, MISSING};
pub use trees::{GbdtModel, GbdtParams, Loss};
