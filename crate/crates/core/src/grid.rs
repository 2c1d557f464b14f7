//! Image and mask containers plus the geometric transforms used for
//! preprocessing (nearest-neighbor resampling) and on-the-fly augmentation
//! (flips and rotation).
//!
//! All grids are stored row-major; multi-channel images are stored
//! channel-major (`c * h * w + y * w + x`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest absolute rotation drawn by [`AugmentParams::sample`], in degrees.
pub const MAX_ROTATION_DEG: f64 = 45.0;

/// A real-valued image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("image must have at least one pixel"));
        }
        if channels == 0 {
            return Err(invalid("image must have at least one channel"));
        }
        if values.len() != height * width * channels {
            return Err(invalid(format!(
                "image buffer has {} values, expected {}",
                values.len(),
                height * width * channels
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(invalid(format!("image value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
        })
    }

    /// Single-channel image filled with `value`.
    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, 1, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Channel-major pixel buffer.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.values[(channel * self.height + y) * self.width + x]
    }

    fn map_planes(&self, height: usize, width: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(height * width * self.channels);
        for c in 0..self.channels {
            values.extend(f(self.plane(c)));
        }
        Self {
            height,
            width,
            channels: self.channels,
            values,
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        self.map_planes(self.height, self.width, |p| {
            flip_plane(p, self.height, self.width, true, false)
        })
    }

    pub fn flip_vertical(&self) -> Self {
        self.map_planes(self.height, self.width, |p| {
            flip_plane(p, self.height, self.width, false, true)
        })
    }

    /// Rotates counter-clockwise by `degrees` about the grid center with
    /// bilinear sampling; samples falling outside the source read as 0.
    pub fn rotate(&self, degrees: f64) -> Self {
        let (h, w) = self.shape();
        self.map_planes(h, w, |p| {
            let mut out = vec![0.0; h * w];
            for_each_inverse_rotation(h, w, degrees, |idx, sy, sx| {
                out[idx] = bilinear(p, h, w, sy, sx);
            });
            out
        })
    }
}

/// Ground-truth labels, every entry exactly 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("mask must have at least one pixel"));
        }
        if labels.len() != height * width {
            return Err(invalid(format!(
                "mask buffer has {} labels, expected {}",
                labels.len(),
                height * width
            )));
        }
        if let Some(v) = labels.iter().find(|v| **v > 1) {
            return Err(invalid(format!("mask label {v} is not 0 or 1")));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Swaps foreground and background.
    pub fn inverted(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            labels: self.labels.iter().map(|l| 1 - l).collect(),
        }
    }

    /// The mask viewed as a probability map with values in {0, 1}.
    pub fn to_prob(&self) -> ProbMask {
        ProbMask {
            height: self.height,
            width: self.width,
            probs: self.labels.iter().map(|&l| f64::from(l)).collect(),
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            labels: flip_plane(&self.labels, self.height, self.width, true, false),
        }
    }

    pub fn flip_vertical(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            labels: flip_plane(&self.labels, self.height, self.width, false, true),
        }
    }

    /// Rotates counter-clockwise by `degrees` about the grid center with
    /// nearest-neighbor sampling, so the result stays binary.
    pub fn rotate(&self, degrees: f64) -> Self {
        let (h, w) = self.shape();
        let mut labels = vec![0u8; h * w];
        for_each_inverse_rotation(h, w, degrees, |idx, sy, sx| {
            let ry = (sy + 0.5).floor();
            let rx = (sx + 0.5).floor();
            if ry >= 0.0 && rx >= 0.0 && (ry as usize) < h && (rx as usize) < w {
                labels[idx] = self.labels[ry as usize * w + rx as usize];
            }
        });
        Self {
            height: h,
            width: w,
            labels,
        }
    }
}

/// Per-pixel foreground probabilities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbMask {
    height: usize,
    width: usize,
    probs: Vec<f64>,
}

impl ProbMask {
    /// Rejects NaN and values outside `[0, 1]`.
    pub fn new(height: usize, width: usize, probs: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("probability map must have at least one pixel"));
        }
        if probs.len() != height * width {
            return Err(invalid(format!(
                "probability buffer has {} values, expected {}",
                probs.len(),
                height * width
            )));
        }
        if let Some(v) = probs.iter().find(|v| v.is_nan() || **v < 0.0 || **v > 1.0) {
            return Err(invalid(format!("probability {v} outside [0, 1]")));
        }
        Ok(Self { height, width, probs })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `1 - p` per pixel.
    pub fn complement(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            probs: self.probs.iter().map(|p| 1.0 - p).collect(),
        }
    }

    /// Copy with a single pixel replaced. Used by finite-difference checks,
    /// so the value is not range-checked.
    pub(crate) fn with_pixel(&self, idx: usize, value: f64) -> Self {
        let mut probs = self.probs.clone();
        probs[idx] = value;
        Self {
            height: self.height,
            width: self.width,
            probs,
        }
    }
}

pub(crate) fn ensure_same_shape(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch { expected, actual });
    }
    Ok(())
}

/// Nearest-neighbor resampling to a target shape.
///
/// Output index `o` reads source index `floor((o + 0.5) * src / dst)`, so the
/// result only ever contains values present in the source.
pub trait ResampleNearest: Sized {
    fn resample_nearest(&self, target_h: usize, target_w: usize) -> Result<Self>;
}

fn nearest_source_index(o: usize, src: usize, dst: usize) -> usize {
    let s = ((o as f64 + 0.5) * src as f64 / dst as f64).floor() as usize;
    s.min(src - 1)
}

fn resample_plane<T: Copy>(src: &[T], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<T> {
    let cols: Vec<usize> = (0..dw).map(|x| nearest_source_index(x, sw, dw)).collect();
    let mut out = Vec::with_capacity(dh * dw);
    for y in 0..dh {
        let row = &src[nearest_source_index(y, sh, dh) * sw..];
        out.extend(cols.iter().map(|&x| row[x]));
    }
    out
}

fn check_target(target_h: usize, target_w: usize) -> Result<()> {
    if target_h == 0 || target_w == 0 {
        return Err(invalid(format!(
            "resample target {target_h}x{target_w} must be at least 1x1"
        )));
    }
    Ok(())
}

impl ResampleNearest for Image {
    fn resample_nearest(&self, target_h: usize, target_w: usize) -> Result<Self> {
        check_target(target_h, target_w)?;
        let (h, w) = self.shape();
        Ok(self.map_planes(target_h, target_w, |p| {
            resample_plane(p, h, w, target_h, target_w)
        }))
    }
}

impl ResampleNearest for BinaryMask {
    fn resample_nearest(&self, target_h: usize, target_w: usize) -> Result<Self> {
        check_target(target_h, target_w)?;
        Ok(Self {
            height: target_h,
            width: target_w,
            labels: resample_plane(&self.labels, self.height, self.width, target_h, target_w),
        })
    }
}

fn flip_plane<T: Copy>(p: &[T], h: usize, w: usize, horizontal: bool, vertical: bool) -> Vec<T> {
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let sy = if vertical { h - 1 - y } else { y };
        for x in 0..w {
            let sx = if horizontal { w - 1 - x } else { x };
            out.push(p[sy * w + sx]);
        }
    }
    out
}

/// Calls `f(out_index, src_y, src_x)` for every output pixel of a rotation by
/// `degrees` about the grid center, using inverse mapping.
fn for_each_inverse_rotation(h: usize, w: usize, degrees: f64, mut f: impl FnMut(usize, f64, f64)) {
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    for y in 0..h {
        // y grows downward, so a counter-clockwise turn on screen flips the
        // sign of the sine term relative to the textbook matrix.
        let dy = y as f64 - cy;
        for x in 0..w {
            let dx = x as f64 - cx;
            let sx = cos * dx - sin * dy + cx;
            let sy = sin * dx + cos * dy + cy;
            f(y * w + x, sy, sx);
        }
    }
}

fn bilinear(p: &[f64], h: usize, w: usize, sy: f64, sx: f64) -> f64 {
    const TOL: f64 = 1e-9;
    if sy < -TOL || sx < -TOL || sy > (h - 1) as f64 + TOL || sx > (w - 1) as f64 + TOL {
        return 0.0;
    }
    let sy = sy.clamp(0.0, (h - 1) as f64);
    let sx = sx.clamp(0.0, (w - 1) as f64);
    let y0 = sy.floor() as usize;
    let x0 = sx.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = sy - y0 as f64;
    let fx = sx - x0 as f64;
    let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
    let bottom = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
    (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
}

/// One draw of the augmentation transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
    pub angle_deg: f64,
}

impl AugmentParams {
    pub const IDENTITY: Self = Self {
        flip_horizontal: false,
        flip_vertical: false,
        angle_deg: 0.0,
    };

    /// Each flip with probability 1/2, angle uniform in [-45, 45] degrees.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            flip_horizontal: rng.random_bool(0.5),
            flip_vertical: rng.random_bool(0.5),
            angle_deg: rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Applies flips first, then the rotation, identically to both grids.
    pub fn apply(&self, img: &Image, mask: &BinaryMask) -> Result<(Image, BinaryMask)> {
        ensure_same_shape(img.shape(), mask.shape())?;
        let mut img = img.clone();
        let mut mask = mask.clone();
        if self.flip_horizontal {
            img = img.flip_horizontal();
            mask = mask.flip_horizontal();
        }
        if self.flip_vertical {
            img = img.flip_vertical();
            mask = mask.flip_vertical();
        }
        if self.angle_deg != 0.0 {
            img = img.rotate(self.angle_deg);
            mask = mask.rotate(self.angle_deg);
        }
        Ok((img, mask))
    }
}

/// Random flip/rotation augmentation, deterministic in `seed`.
pub fn augment(img: &Image, mask: &BinaryMask, seed: u64) -> Result<(Image, BinaryMask)> {
    ensure_same_shape(img.shape(), mask.shape())?;
    AugmentParams::from_seed(seed).apply(img, mask)
}
