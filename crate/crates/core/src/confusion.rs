//! Soft (probabilistic) and hard confusion-matrix entries.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{ensure_same_shape, BinaryMask, ProbMask};

/// Default binarization threshold for reported metrics.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Real-valued confusion entries accumulated from probabilistic predictions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SoftConfusion {
    pub tp: f64,
    pub tn: f64,
    pub fp: f64,
    pub fn_: f64,
}

impl SoftConfusion {
    pub fn total(&self) -> f64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Exact integer confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HardConfusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl HardConfusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl From<HardConfusion> for SoftConfusion {
    fn from(c: HardConfusion) -> Self {
        Self {
            tp: c.tp as f64,
            tn: c.tn as f64,
            fp: c.fp as f64,
            fn_: c.fn_ as f64,
        }
    }
}

/// `tp = Σ p·y`, `tn = Σ (1-p)(1-y)`, `fp = Σ p(1-y)`, `fn = Σ (1-p)·y`.
pub fn soft_confusion(pred: &ProbMask, gt: &BinaryMask) -> Result<SoftConfusion> {
    ensure_same_shape(gt.shape(), pred.shape())?;
    let mut c = SoftConfusion::default();
    for (&p, &y) in pred.probs().iter().zip(gt.labels()) {
        if y == 1 {
            c.tp += p;
            c.fn_ += 1.0 - p;
        } else {
            c.fp += p;
            c.tn += 1.0 - p;
        }
    }
    Ok(c)
}

pub fn hard_confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<HardConfusion> {
    ensure_same_shape(gt.shape(), pred.shape())?;
    let mut c = HardConfusion::default();
    for (&p, &y) in pred.labels().iter().zip(gt.labels()) {
        match (p, y) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (1, 0) => c.fp += 1,
            _ => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Pixel becomes foreground iff `prob >= threshold`.
pub fn binarize(pred: &ProbMask, threshold: f64) -> Result<BinaryMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid(format!("threshold {threshold} outside (0, 1)")));
    }
    let labels = pred.probs().iter().map(|&p| u8::from(p >= threshold)).collect();
    BinaryMask::new(pred.height(), pred.width(), labels)
}
