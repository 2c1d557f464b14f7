use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};

/// Largest number of nonzero differences handled by the exact null
/// distribution. Larger samples, or samples with tied magnitudes, use the
/// normal approximation.
pub const EXACT_MAX_N: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApproximation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub w_statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: WilcoxonMethod,
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their
/// positions. Also returns the sizes of tie groups longer than one.
fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Number of subsets of `{1, ..., n}` with each possible sum.
fn rank_sum_counts(n: usize) -> Vec<u64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for r in 1..=n {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    counts
}

fn exact_p(n: usize, w: f64) -> f64 {
    let counts = rank_sum_counts(n);
    let w = w.round() as usize;
    let tail: u64 = counts[..=w.min(counts.len() - 1)].iter().sum();
    (2.0 * tail as f64 / 2f64.powi(n as i32)).min(1.0)
}

fn normal_p(n: usize, w: f64, ties: &[usize]) -> f64 {
    let n = n as f64;
    let mu = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mu).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Two-sided paired Wilcoxon signed-rank test of `a` against `b`.
///
/// Zero differences are dropped. When every difference is zero the result
/// has `p = 1` and `n_effective = 0`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.is_empty() || a.len() != b.len() {
        return Err(invalid(format!(
            "paired samples need equal nonzero lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("paired samples must be finite"));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            w_statistic: 0.0,
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            n_effective: 0,
            method: WilcoxonMethod::Exact,
        });
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&magnitudes);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let w_minus = (n * (n + 1)) as f64 / 2.0 - w_plus;
    let w = w_plus.min(w_minus);
    let (p_value, method) = if n <= EXACT_MAX_N && ties.is_empty() {
        (exact_p(n, w), WilcoxonMethod::Exact)
    } else {
        (normal_p(n, w, &ties), WilcoxonMethod::NormalApproximation)
    };
    Ok(WilcoxonResult {
        w_statistic: w,
        w_plus,
        w_minus,
        p_value,
        n_effective: n,
        method,
    })
}
