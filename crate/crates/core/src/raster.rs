//! Raster input and binarization.
//!
//! Everything downstream works on [`BinaryImage`], where ink is `1` and
//! background is `0`. Input pages are assumed to be dark ink on a light
//! background; no polarity detection is attempted.

use std::path::Path;

use image::{DynamicImage, ImageReader};

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    samples: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width as usize * height as usize {
            return Err(Error::validation(format!(
                "expected {} samples for {width}x{height}, got {}",
                width as usize * height as usize,
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.samples[y as usize * self.width as usize + x as usize]
    }

    /// Encode to a file; the format follows the extension (`.pgm` or `.png`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let buf = image::GrayImage::from_raw(self.width, self.height, self.samples.clone())
            .expect("dimensions checked at construction");
        buf.save(path).map_err(|e| image_error(path, e))
    }
}

/// Row-major binary raster: `1` is ink, `0` is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if bits.len() != width as usize * height as usize {
            return Err(Error::validation(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width as usize * height as usize,
                bits.len()
            )));
        }
        if let Some(v) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::validation(format!(
                "binary pixel value {v} is not 0 or 1"
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// An all-background image.
    pub fn blank(width: u32, height: u32) -> Result<Self> {
        Self::new(width, height, vec![0; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, ink: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = ink as u8;
    }

    /// Fill the inclusive rectangle with ink, clipped to the image.
    pub fn fill_rect(&mut self, x_min: u32, y_min: u32, x_max: u32, y_max: u32) {
        let x_max = x_max.min(self.width - 1);
        let y_max = y_max.min(self.height - 1);
        for y in y_min..=y_max {
            let row = y as usize * self.width as usize;
            self.bits[row + x_min as usize..=row + x_max as usize].fill(1);
        }
    }

    pub fn ink_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Copy of the image with `dx` blank columns prepended on the left and
    /// `dy` blank rows on top.
    pub fn padded(&self, dx: u32, dy: u32) -> BinaryImage {
        let width = self.width + dx;
        let height = self.height + dy;
        let mut bits = vec![0u8; width as usize * height as usize];
        for y in 0..self.height {
            let src = y as usize * self.width as usize;
            let dst = (y + dy) as usize * width as usize + dx as usize;
            bits[dst..dst + self.width as usize]
                .copy_from_slice(&self.bits[src..src + self.width as usize]);
        }
        BinaryImage {
            width,
            height,
            bits,
        }
    }

    /// Render as dark ink (0) on white (255).
    pub fn to_gray(&self) -> GrayImage {
        let samples = self
            .bits
            .iter()
            .map(|&b| if b == 1 { 0 } else { 255 })
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            samples,
        }
    }
}

/// Decode a PGM or PNG file into grayscale. Color inputs are reduced with
/// Rec.601 luma weights, alpha is ignored.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let reader = ImageReader::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = reader.with_guessed_format().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = reader.decode().map_err(|e| image_error(path, e))?;
    from_dynamic(decoded).map_err(|e| match e {
        Error::Format { message, .. } => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

fn from_dynamic(img: DynamicImage) -> Result<GrayImage> {
    let (width, height) = (img.width(), img.height());
    let samples = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| rec601(p.0[0], p.0[1], p.0[2]))
            .collect(),
        DynamicImage::ImageRgba8(buf) => buf
            .pixels()
            .map(|p| rec601(p.0[0], p.0[1], p.0[2]))
            .collect(),
        other => {
            return Err(Error::Format {
                path: Default::default(),
                message: format!("only 8-bit images are supported, got {:?}", other.color()),
            })
        }
    };
    GrayImage::new(width, height, samples)
}

fn image_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Format {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Rec.601 luma, rounded to nearest.
pub fn rec601(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000) as u8
}

/// Otsu's global threshold, expressed in the `sample < threshold` ink
/// convention used by [`binarize`].
///
/// Returns `0` (no ink) for single-level images, which have no split.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let mut hist = [0u64; 256];
    for &s in img.samples() {
        hist[s as usize] += 1;
    }
    let total = img.samples().len() as f64;
    let sum_total: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &h)| v as f64 * h as f64)
        .sum();

    let mut w_back = 0f64;
    let mut sum_back = 0f64;
    let mut best: Option<(usize, f64)> = None;
    for (level, &h) in hist.iter().enumerate().take(255) {
        w_back += h as f64;
        sum_back += level as f64 * h as f64;
        let w_fore = total - w_back;
        if w_back == 0.0 || w_fore == 0.0 {
            continue;
        }
        let mean_back = sum_back / w_back;
        let mean_fore = (sum_total - sum_back) / w_fore;
        let between = w_back * w_fore * (mean_back - mean_fore).powi(2);
        if best.is_none_or(|(_, v)| between > v) {
            best = Some((level, between));
        }
    }
    // Levels <= the split are the dark class, i.e. ink.
    best.map_or(0, |(level, _)| (level + 1) as u8)
}

/// Binarize with `sample < threshold` as ink; Otsu picks the threshold when
/// none is given.
pub fn binarize(img: &GrayImage, threshold: Option<u8>) -> BinaryImage {
    let t = threshold.unwrap_or_else(|| otsu_threshold(img));
    let bits = img.samples().iter().map(|&s| (s < t) as u8).collect();
    BinaryImage {
        width: img.width(),
        height: img.height(),
        bits,
    }
}
