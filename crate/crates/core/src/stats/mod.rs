//! Significance testing and density estimation for comparing two models.

mod kde;
mod wilcoxon;

pub use kde::{epanechnikov, kde_epanechnikov, linspace, silverman_bandwidth, Bandwidth, KdeCurve};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_MAX_N};
