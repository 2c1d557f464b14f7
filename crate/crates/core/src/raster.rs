//! PNG reading and writing for images and masks.
//!
//! Images load as 1 channel (grayscale sources) or 3 channels (everything
//! else) with 8-bit values divided by 255. Masks load as grayscale and a
//! pixel is foreground when its value is at least [`MASK_THRESHOLD`].

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{invalid, Error, Result};
use crate::grid::{BinaryMask, Image};

pub const MASK_THRESHOLD: u8 = 128;

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })
}

fn save_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_owned(),
        source,
    }
}

pub fn read_image(path: &Path) -> Result<Image> {
    let dynamic = open(path)?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    if dynamic.color().has_color() {
        let rgb = dynamic.to_rgb8();
        let mut values = vec![0.0; 3 * h * w];
        for (i, px) in rgb.pixels().enumerate() {
            for c in 0..3 {
                values[c * h * w + i] = f64::from(px[c]) / 255.0;
            }
        }
        Image::new(h, w, 3, values)
    } else {
        let gray = dynamic.to_luma8();
        Image::new(h, w, 1, gray.pixels().map(|p| f64::from(p[0]) / 255.0).collect())
    }
}

pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let gray = open(path)?.to_luma8();
    let labels = gray.pixels().map(|p| u8::from(p[0] >= MASK_THRESHOLD)).collect();
    BinaryMask::new(gray.height() as usize, gray.width() as usize, labels)
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes 8-bit grayscale or RGB depending on the channel count.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    let (h, w) = img.shape();
    match img.channels() {
        1 => {
            let buf: GrayImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
                Luma([to_byte(img.get(0, y as usize, x as usize))])
            });
            buf.save(path).map_err(save_err(path))
        }
        3 => {
            let buf: RgbImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
                let (x, y) = (x as usize, y as usize);
                Rgb([0, 1, 2].map(|c| to_byte(img.get(c, y, x))))
            });
            buf.save(path).map_err(save_err(path))
        }
        c => Err(invalid(format!("cannot encode a {c}-channel image as PNG"))),
    }
}

/// Foreground as 255, background as 0.
pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let (h, w) = mask.shape();
    let buf: GrayImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        Luma([mask.get(y as usize, x as usize) * 255])
    });
    buf.save(path).map_err(save_err(path))
}
