//! Hard evaluation metrics on binarized predictions.
//!
//! Degenerate ratios follow one rule: `0/0` scores 1 (nothing to get wrong),
//! except MCC, which scores 0 whenever a marginal vanishes.

use serde::{Deserialize, Serialize};

use crate::confusion::{hard_confusion, HardConfusion};
use crate::error::{invalid, Result};
use crate::grid::BinaryMask;

/// Names of the reported metrics, in report order.
pub const METRIC_NAMES: [&str; 6] = ["dice", "jaccard", "accuracy", "sensitivity", "specificity", "mcc"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub dice: f64,
    pub jaccard: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub mcc: f64,
}

impl MetricRecord {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "dice" => self.dice,
            "jaccard" => self.jaccard,
            "accuracy" => self.accuracy,
            "sensitivity" => self.sensitivity,
            "specificity" => self.specificity,
            "mcc" => self.mcc,
            _ => return None,
        })
    }

    pub fn values(&self) -> [f64; 6] {
        [
            self.dice,
            self.jaccard,
            self.accuracy,
            self.sensitivity,
            self.specificity,
            self.mcc,
        ]
    }

    fn from_values(v: [f64; 6]) -> Self {
        Self {
            dice: v[0],
            jaccard: v[1],
            accuracy: v[2],
            sensitivity: v[3],
            specificity: v[4],
            mcc: v[5],
        }
    }
}

fn ratio_or_one(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// All six metrics from exact counts.
pub fn from_counts(c: &HardConfusion) -> MetricRecord {
    let HardConfusion { tp, tn, fp, fn_ } = *c;
    let marginals = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    let mcc = if marginals.contains(&0) {
        0.0
    } else {
        let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
        let den: f64 = marginals.iter().map(|&m| m as f64).product();
        (num / den.sqrt()).clamp(-1.0, 1.0)
    };
    MetricRecord {
        dice: ratio_or_one(2 * tp, 2 * tp + fp + fn_),
        jaccard: ratio_or_one(tp, tp + fp + fn_),
        accuracy: ratio_or_one(tp + tn, c.total()),
        sensitivity: ratio_or_one(tp, tp + fn_),
        specificity: ratio_or_one(tn, tn + fp),
        mcc,
    }
}

pub fn eval_pair(pred: &BinaryMask, gt: &BinaryMask) -> Result<MetricRecord> {
    Ok(from_counts(&hard_confusion(pred, gt)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

/// Mean and standard error of each metric over a set of images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub dice: MeanSe,
    pub jaccard: MeanSe,
    pub accuracy: MeanSe,
    pub sensitivity: MeanSe,
    pub specificity: MeanSe,
    pub mcc: MeanSe,
}

impl MetricReport {
    pub fn get(&self, name: &str) -> Option<MeanSe> {
        Some(match name {
            "dice" => self.dice,
            "jaccard" => self.jaccard,
            "accuracy" => self.accuracy,
            "sensitivity" => self.sensitivity,
            "specificity" => self.specificity,
            "mcc" => self.mcc,
            _ => return None,
        })
    }

    pub fn means(&self) -> MetricRecord {
        MetricRecord::from_values(METRIC_NAMES.map(|m| self.get(m).unwrap().mean))
    }
}

/// Sample mean and `stddev(n-1) / sqrt(n)`; SE is 0 for a single value.
pub fn mean_se(values: &[f64]) -> Result<MeanSe> {
    if values.is_empty() {
        return Err(invalid("cannot summarize an empty sample"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok(MeanSe { mean, se: 0.0 });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MeanSe {
        mean,
        se: var.sqrt() / n.sqrt(),
    })
}

pub fn aggregate(records: &[MetricRecord]) -> Result<MetricReport> {
    if records.is_empty() {
        return Err(invalid("cannot aggregate an empty record list"));
    }
    let col = |i: usize| -> Result<MeanSe> {
        let v: Vec<f64> = records.iter().map(|r| r.values()[i]).collect();
        mean_se(&v)
    };
    Ok(MetricReport {
        n: records.len(),
        dice: col(0)?,
        jaccard: col(1)?,
        accuracy: col(2)?,
        sensitivity: col(3)?,
        specificity: col(4)?,
        mcc: col(5)?,
    })
}
