//! Random-forest similarity kernels for support vector machines.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: CSV ingestion, label encoding, stratified splits and the
//!   HDLSS profile (Ω, imbalance ratio).
//! - [`forest`]: bootstrap-sampled CART trees with per-tree leaf lookup.
//! - [`kernel`]: random-forest, cosine and RBF kernel matrices plus
//!   positive semi-definiteness checks.
//! - [`svm`]: soft-margin SVM solved in the dual by SMO on a precomputed
//!   kernel, composed one-vs-one for multiclass problems.
//! - [`stats`]: Friedman/Nemenyi ranking and the Bayesian sign test.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the experiment
//! harness uses.

pub mod data;
pub mod error;
pub mod forest;
pub mod kernel;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod svm;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type ForestModel = forest::ForestModel<f64>;
pub type ForestModel32 = forest::ForestModel<f32>;
pub type Tree = forest::Tree<f64>;
pub type KernelMatrix = kernel::KernelMatrix<f64>;
pub type KernelMatrix32 = kernel::KernelMatrix<f32>;
pub type SvmHyperparams = svm::SvmHyperparams<f64>;
pub type BinarySvmModel = svm::BinarySvmModel<f64>;
pub type SvmModel = svm::SvmModel<f64>;
pub type ScoreTable = stats::ScoreTable<f64>;
