//! Vision front end: FER2013 CSV parsing, PGM loading, normalization,
//! resizing, affine augmentation, and label encoding.
//!
//! Images are grayscale, row-major, with pixels normalized to `[0, 1]` at
//! every ingestion boundary.

mod augment;
mod fer;
mod manifest;
mod pgm;
mod resize;

pub use augment::{affine_augment, AugmentParams};
pub use fer::{parse_fer_csv, FerParse, FerRecord, RowIssue, Usage, EMOTION_NAMES, FER_SIDE};
pub use manifest::read_manifest;
pub use pgm::{load_pgm, read_pgm, save_pgm, write_pgm};
pub use resize::resize_bilinear;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("pixel buffer of {got} values does not match {width}x{height}")]
    PixelCount {
        width: usize,
        height: usize,
        got: usize,
    },
    #[error("pixel value {0} outside [0, 1]")]
    PixelRange(f32),
    #[error("image dimensions must be at least 1x1")]
    ZeroDimension,
    #[error("missing FER header row 'emotion,pixels,Usage'")]
    FerHeader,
    #[error("not a binary P5 PGM")]
    PgmMagic,
    #[error("malformed PGM header")]
    PgmHeader,
    #[error("unsupported PGM maxval {0} (only 255)")]
    PgmMaxval(u32),
    #[error("truncated PGM payload")]
    PgmTruncated,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid augmentation parameters: {0}")]
    BadAugmentParams(&'static str),
    #[error("manifest line {line}: {message}")]
    ManifestRow { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major grayscale image with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroDimension);
        }
        if pixels.len() != width * height {
            return Err(ImagingError::PixelCount {
                width,
                height,
                got: pixels.len(),
            });
        }
        if let Some(&bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ImagingError::PixelRange(bad));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn black(width: usize, height: usize) -> Result<Self, ImagingError> {
        GrayImage::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.pixels[y * self.width + x] = v;
    }

    /// Consume the image, yielding its pixel buffer.
    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }
}

/// Unit vector of length `classes` with a one at `label`.
pub fn one_hot(label: usize, classes: usize) -> Result<Vec<f32>, ImagingError> {
    if label >= classes {
        return Err(ImagingError::LabelOutOfRange { label, classes });
    }
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    Ok(v)
}
