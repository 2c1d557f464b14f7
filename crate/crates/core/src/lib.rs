//! Segmentation losses built on soft confusion matrices.
//!
//! The crate provides a differentiable Matthews-correlation loss with its
//! analytic per-pixel gradient, Dice and Jaccard losses for comparison, hard
//! evaluation metrics, a Wilcoxon signed-rank test and Epanechnikov density
//! estimates for comparing models, and a small encoder-decoder network that
//! can be trained on synthetic or on-disk image/mask pairs.

pub mod confusion;
pub mod data;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod raster;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
