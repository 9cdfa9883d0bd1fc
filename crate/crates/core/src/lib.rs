//! Sum-of-submodular (SoS) higher-order energies: exact minimization by
//! submodular flow, large-margin learning with a cutting-plane structural
//! SVM, multi-label expansion moves, and the denoising / interactive
//! segmentation pipelines built on top.

pub mod app;
pub mod energy;
pub mod error;
pub mod flow;
pub mod learn;
pub mod multilabel;
pub mod pipelines;
pub mod qp;

pub use error::{Error, Result};
