//! Synthetic lesion generation, paired image/mask directories, and seeded
//! train/validation/test partitioning.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{BinaryMask, Image, ResampleNearest};
use crate::raster;

/// Intensity of healthy background in synthetic images.
pub const BACKGROUND_LEVEL: f64 = 0.55;

/// Suffix that marks a mask file in a dataset directory.
pub const MASK_SUFFIX: &str = "_mask";

const MAX_ATTEMPTS: usize = 1000;

/// One named image/mask pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub name: String,
    pub image: Image,
    pub mask: BinaryMask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub size: usize,
    pub fg_fraction_min: f64,
    pub fg_fraction_max: f64,
    /// How much darker than the background the lesion is.
    pub contrast: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 200,
            size: 64,
            fg_fraction_min: 0.04,
            fg_fraction_max: 0.06,
            contrast: 0.25,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.fg_fraction_min, self.fg_fraction_max);
        if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
            return Err(invalid(format!(
                "foreground fraction range [{lo}, {hi}] must lie inside (0, 1)"
            )));
        }
        if self.size == 0 || !self.size.is_multiple_of(4) {
            return Err(invalid(format!(
                "size {} must be a positive multiple of 4",
                self.size
            )));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(invalid(format!("contrast {} outside (0, 1]", self.contrast)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid(format!(
                "noise sigma {} must be nonnegative",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Filled ellipse; a pixel is inside when its center satisfies the ellipse
/// inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub cy: f64,
    pub cx: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub angle: f64,
}

impl Ellipse {
    pub fn contains(&self, y: f64, x: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let dy = y - self.cy;
        let dx = x - self.cx;
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.semi_major).powi(2) + (v / self.semi_minor).powi(2) <= 1.0
    }

    pub fn rasterize(&self, size: usize) -> BinaryMask {
        let labels = (0..size * size)
            .map(|i| u8::from(self.contains((i / size) as f64 + 0.5, (i % size) as f64 + 0.5)))
            .collect();
        BinaryMask::new(size, size, labels).expect("square mask")
    }
}

fn sample_ellipse(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Ellipse {
    let size = cfg.size as f64;
    let frac = rng.random_range(cfg.fg_fraction_min..=cfg.fg_fraction_max);
    let aspect = rng.random_range(0.5..=1.0);
    let area = frac * size * size;
    let semi_major = (area / (std::f64::consts::PI * aspect)).sqrt();
    let semi_minor = semi_major * aspect;
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let margin = (semi_major + 1.0).min(size / 2.0);
    let cy = rng.random_range(margin..=size - margin);
    let cx = rng.random_range(margin..=size - margin);
    Ellipse {
        cy,
        cx,
        semi_major,
        semi_minor,
        angle,
    }
}

/// Random dark ellipses on a noisy bright background, deterministic in the
/// config seed.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise =
        Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).map_err(|e| invalid(e.to_string()))?;
    let n = (cfg.size * cfg.size) as f64;
    let width = cfg.count.max(1).to_string().len().max(3);
    let mut out = Vec::with_capacity(cfg.count);
    for idx in 0..cfg.count {
        let mask = (0..MAX_ATTEMPTS)
            .map(|_| sample_ellipse(cfg, &mut rng).rasterize(cfg.size))
            .find(|m| {
                let f = m.foreground_count() as f64 / n;
                f >= cfg.fg_fraction_min && f <= cfg.fg_fraction_max
            })
            .ok_or_else(|| {
                Error::Generation(format!(
                    "no ellipse with foreground fraction in [{}, {}] on a {}px grid after {MAX_ATTEMPTS} attempts",
                    cfg.fg_fraction_min, cfg.fg_fraction_max, cfg.size
                ))
            })?;
        let values = mask
            .labels()
            .iter()
            .map(|&l| {
                let base = BACKGROUND_LEVEL - cfg.contrast * f64::from(l);
                let jitter = if cfg.noise_sigma > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                (base + jitter).clamp(0.0, 1.0)
            })
            .collect();
        let image = Image::new(cfg.size, cfg.size, 1, values)?;
        out.push(Sample {
            name: format!("synth_{idx:0width$}"),
            image,
            mask,
        });
    }
    Ok(out)
}

/// Writes `<name>.png` and `<name>_mask.png` for every sample. Returns the
/// written paths in order.
pub fn export_directory(samples: &[Sample], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(samples.len() * 2);
    for s in samples {
        let img_path = dir.join(format!("{}.png", s.name));
        let mask_path = dir.join(format!("{}{MASK_SUFFIX}.png", s.name));
        raster::write_image(&img_path, &s.image)?;
        raster::write_mask(&mask_path, &s.mask)?;
        written.push(img_path);
        written.push(mask_path);
    }
    Ok(written)
}

/// Files that could not be paired or read.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub skipped: Vec<SkippedFile>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

/// Loads `<stem>.png` / `<stem>_mask.png` pairs in lexicographic stem order.
/// Orphans and unreadable files go to the report instead of failing the load.
pub fn load_directory(dir: &Path) -> Result<(Vec<Sample>, LoadReport)> {
    let mut report = LoadReport::default();
    let mut images: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut masks: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if !path.is_file() || !is_png {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        match stem.strip_suffix(MASK_SUFFIX) {
            Some(base) => masks.insert(base.to_owned(), path),
            None => images.insert(stem, path),
        };
    }
    let mut samples = Vec::new();
    for (stem, img_path) in &images {
        let Some(mask_path) = masks.remove(stem) else {
            report.skipped.push(SkippedFile {
                path: img_path.clone(),
                reason: "no matching mask".into(),
            });
            continue;
        };
        let loaded =
            raster::read_image(img_path).and_then(|img| raster::read_mask(&mask_path).map(|m| (img, m)));
        match loaded {
            Ok((image, mask)) if image.shape() == mask.shape() => samples.push(Sample {
                name: stem.clone(),
                image,
                mask,
            }),
            Ok(_) => report.skipped.push(SkippedFile {
                path: img_path.clone(),
                reason: "image and mask sizes differ".into(),
            }),
            Err(e) => report.skipped.push(SkippedFile {
                path: img_path.clone(),
                reason: e.to_string(),
            }),
        }
    }
    for (_, path) in masks {
        report.skipped.push(SkippedFile {
            path,
            reason: "no matching image".into(),
        });
    }
    if samples.is_empty() {
        report
            .warnings
            .push(format!("no image/mask pairs found in {}", dir.display()));
    }
    Ok((samples, report))
}

/// Nearest-neighbor resampling of every image and mask to `size x size`.
pub fn resample_samples(samples: Vec<Sample>, size: usize) -> Result<Vec<Sample>> {
    samples
        .into_iter()
        .map(|s| {
            Ok(Sample {
                image: s.image.resample_nearest(size, size)?,
                mask: s.mask.resample_nearest(size, size)?,
                name: s.name,
            })
        })
        .collect()
}

/// Which part of a [`DatasetSplit`] to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "validation" | "val" => Ok(SplitName::Validation),
            "test" => Ok(SplitName::Test),
            other => Err(invalid(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

impl<T> DatasetSplit<T> {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }

    pub fn get(&self, name: SplitName) -> &[T] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Validation => &self.validation,
            SplitName::Test => &self.test,
        }
    }
}

/// Seeded shuffle, then cuts at `floor(0.6 n)` and `floor(0.7 n)`.
pub fn split_60_10_30<T>(items: Vec<T>, seed: u64) -> Result<DatasetSplit<T>> {
    let n = items.len();
    if n < 3 {
        return Err(invalid(format!("need at least 3 items to split, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut1 = n * 6 / 10;
    let cut2 = n * 7 / 10;
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut take = |range: std::ops::Range<usize>| -> Vec<T> {
        order[range]
            .iter()
            .map(|&i| slots[i].take().expect("each index used once"))
            .collect()
    };
    Ok(DatasetSplit {
        train: take(0..cut1),
        validation: take(cut1..cut2),
        test: take(cut2..n),
    })
}
