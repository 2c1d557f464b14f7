use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Number of grid points used when no evaluation grid is supplied.
pub const DEFAULT_GRID_POINTS: usize = 256;

/// Ratio of the Epanechnikov to the Gaussian canonical bandwidth.
const EPANECHNIKOV_FACTOR: f64 = 2.214;

/// `0.75 (1 - u^2)` on `|u| <= 1`, zero elsewhere.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Fixed(f64),
    /// Silverman's rule of thumb rescaled for the Epanechnikov kernel.
    Silverman,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl KdeCurve {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }

    /// Two columns, `grid,density`, with a header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "grid,density")?;
        for (x, y) in self.grid.iter().zip(&self.density) {
            writeln!(out, "{x},{y}")?;
        }
        Ok(())
    }
}

/// `n` evenly spaced points from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { end } else { start + step * i as f64 })
                .collect()
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `0.9 * min(sd, IQR / 1.34) * n^(-1/5) * 2.214`.
///
/// Falls back to whichever spread estimate is positive, and to
/// `1e-3 * (|mean| + 1)` for constant samples.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(invalid("bandwidth selection needs at least two samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = (quantile(&sorted, 0.75) - quantile(&sorted, 0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => return Ok(1e-3 * (mean.abs() + 1.0)),
    };
    Ok(0.9 * spread * n.powf(-0.2) * EPANECHNIKOV_FACTOR)
}

/// Epanechnikov kernel density estimate evaluated on `grid`, or on
/// [`DEFAULT_GRID_POINTS`] points spanning the observed range.
pub fn kde_epanechnikov(samples: &[f64], grid: Option<&[f64]>, bandwidth: Bandwidth) -> Result<KdeCurve> {
    if samples.len() < 2 {
        return Err(invalid(format!(
            "density estimation needs at least two samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let h = match bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(invalid(format!("bandwidth must be positive, got {h}"))),
        Bandwidth::Silverman => silverman_bandwidth(samples)?,
    };
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => {
            let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            linspace(lo, hi, DEFAULT_GRID_POINTS)
        }
    };
    let norm = 1.0 / (samples.len() as f64 * h);
    let density = grid
        .iter()
        .map(|&x| norm * samples.iter().map(|s| epanechnikov((x - s) / h)).sum::<f64>())
        .collect();
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
    })
}
