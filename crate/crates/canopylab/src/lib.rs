//! Weakly-supervised urban tree mapping.
//!
//! The pipeline turns a LiDAR survey into per-cell neighborhood statistics,
//! thresholds those into noisy tree labels with a small rule language, trains
//! a Gaussian-kernel SVM on 4-band imagery pixels against the noisy labels,
//! evaluates masks against exact references, and quantifies tree-cover change
//! between years with red loss overlays.
//!
//! Heavy loops are data-parallel over grid rows (rayon, `parallel` feature,
//! on by default) with a sequential fallback; outputs are bit-identical
//! across thread counts either way.

pub mod change;
pub mod error;
pub mod metrics;
mod parallel;
pub mod pipeline;
pub mod pointcloud;
pub mod raster;
pub mod rules;
pub mod stats;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
