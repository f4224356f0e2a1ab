//! Greyscale images and labelled image collections.
//!
//! Pixels are stored as `f64` grey values in `[0, 255]`, row-major. Images read
//! from disk always hold integer values; transformations such as contrast
//! scaling or bilinear resampling may produce fractional values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_GREY: f64 = 255.0;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1 (got {width}x{height})")]
    EmptyDims { width: usize, height: usize },
    #[error("pixel buffer has {got} values, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pixel {index} has value {value}, outside [0, 255]")]
    OutOfRange { index: usize, value: f64 },
    #[error("images ({images}) and labels ({labels}) differ in length")]
    LabelCount { images: usize, labels: usize },
    #[error("label {label} at position {index} is not a digit class")]
    BadLabel { index: usize, label: u8 },
}

/// Dense 2D grid of grey values. `pixels[row * width + col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreyscaleImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GreyscaleImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDims { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImageError::LengthMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=MAX_GREY).contains(*v))
        {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self, ImageError> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    /// Builds an image from rows of grey values; handy for small fixtures.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, ImageError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut pixels = Vec::with_capacity(width * height);
        for row in rows {
            if row.len() != width {
                return Err(ImageError::LengthMismatch {
                    expected: width * height,
                    got: pixels.len() + row.len(),
                });
            }
            pixels.extend_from_slice(row);
        }
        Self::new(width, height, pixels)
    }

    /// Clamps every value into `[0, 255]` (NaN becomes 0) and builds the image.
    pub(crate) fn from_clipped(width: usize, height: usize, mut pixels: Vec<f64>) -> Self {
        for p in &mut pixels {
            *p = clip_grey(*p);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn max_value(&self) -> f64 {
        self.pixels.iter().copied().fold(0.0, f64::max)
    }

    /// True when every pixel holds an integer grey level.
    pub fn is_integral(&self) -> bool {
        self.pixels.iter().all(|p| p.fract() == 0.0)
    }

    /// Rounds each value to the nearest grey level for byte-oriented formats.
    pub fn to_bytes_rounded(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| round_half_away(p).clamp(0.0, MAX_GREY) as u8)
            .collect()
    }
}

#[inline]
pub(crate) fn clip_grey(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, MAX_GREY)
    }
}

/// Round half away from zero (`f64::round` semantics), named for clarity at call sites.
#[inline]
pub fn round_half_away(v: f64) -> f64 {
    v.round()
}

/// Images paired with digit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Vec<GreyscaleImage>,
    labels: Vec<u8>,
    source: String,
}

impl LabeledDataset {
    pub fn new(
        images: Vec<GreyscaleImage>,
        labels: Vec<u8>,
        source: impl Into<String>,
    ) -> Result<Self, ImageError> {
        if images.len() != labels.len() {
            return Err(ImageError::LabelCount {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
            return Err(ImageError::BadLabel { index, label });
        }
        Ok(Self {
            images,
            labels,
            source: source.into(),
        })
    }

    pub fn images(&self) -> &[GreyscaleImage] {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub(crate) fn into_parts(self) -> (Vec<GreyscaleImage>, Vec<u8>, String) {
        (self.images, self.labels, self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_bad_shapes() {
        assert!(matches!(
            GreyscaleImage::new(0, 3, vec![]),
            Err(ImageError::EmptyDims { .. })
        ));
        assert!(matches!(
            GreyscaleImage::new(2, 2, vec![0.0; 3]),
            Err(ImageError::LengthMismatch { .. })
        ));
        assert!(matches!(
            GreyscaleImage::new(1, 1, vec![256.0]),
            Err(ImageError::OutOfRange { index: 0, .. })
        ));
        assert!(GreyscaleImage::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn dataset_checks_labels() {
        let img = GreyscaleImage::from_bytes(1, 1, &[3]).unwrap();
        assert!(LabeledDataset::new(vec![img.clone()], vec![10], "t").is_err());
        assert!(LabeledDataset::new(vec![img.clone()], vec![], "t").is_err());
        assert_eq!(LabeledDataset::new(vec![img], vec![9], "t").unwrap().len(), 1);
    }

    #[test]
    fn rows_accessors() {
        let img = GreyscaleImage::from_rows(&[&[0.0, 255.0], &[10.0, 20.0]]).unwrap();
        assert_eq!(img.get(0, 1), 255.0);
        assert_eq!(img.get(1, 0), 10.0);
        assert_eq!(img.max_value(), 255.0);
        assert!(img.is_integral());
    }
}
