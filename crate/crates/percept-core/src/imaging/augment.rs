//! Random affine augmentation: rotation, shear, and zoom about the center.

use crate::rng::Prng;

use super::{GrayImage, ImagingError};

/// Ranges for the per-sample augmentation draw.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentParams {
    /// Rotation is drawn from `[-max_rotation_deg, max_rotation_deg]`.
    pub max_rotation_deg: f32,
    /// Horizontal shear is drawn from `[-shear_factor, shear_factor]`.
    pub shear_factor: f32,
    /// Zoom is drawn from `[zoom.0, zoom.1]`; values < 1 shrink content.
    pub zoom: (f32, f32),
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            max_rotation_deg: 15.0,
            shear_factor: 0.1,
            zoom: (0.9, 1.1),
        }
    }
}

impl AugmentParams {
    pub fn validate(&self) -> Result<(), ImagingError> {
        if self.max_rotation_deg < 0.0 || !self.max_rotation_deg.is_finite() {
            return Err(ImagingError::BadAugmentParams("rotation must be >= 0"));
        }
        if self.shear_factor < 0.0 || !self.shear_factor.is_finite() {
            return Err(ImagingError::BadAugmentParams("shear must be >= 0"));
        }
        if !(self.zoom.0 > 0.0 && self.zoom.0 <= self.zoom.1 && self.zoom.1.is_finite()) {
            return Err(ImagingError::BadAugmentParams(
                "zoom range must satisfy 0 < low <= high",
            ));
        }
        Ok(())
    }
}

/// Apply one random affine transform drawn from `params`.
///
/// The draw order is rotation, shear, zoom (one PRNG consumption each). The
/// forward map is `zoom * rotation * shear` about the image center; each
/// output pixel is inverse-mapped and sampled bilinearly, with out-of-bounds
/// reads filled black.
pub fn affine_augment(
    img: &GrayImage,
    params: &AugmentParams,
    prng: &mut Prng,
) -> Result<GrayImage, ImagingError> {
    params.validate()?;
    let theta = prng
        .uniform(-params.max_rotation_deg, params.max_rotation_deg)
        .to_radians();
    let shear = prng.uniform(-params.shear_factor, params.shear_factor);
    let zoom = prng.uniform(params.zoom.0, params.zoom.1);
    Ok(apply_affine(img, theta, shear, zoom))
}

/// Deterministic core: forward map M = Z(zoom) . R(theta) . Shear(s).
fn apply_affine(img: &GrayImage, theta: f32, shear: f32, zoom: f32) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w - 1) as f32 / 2.0, (h - 1) as f32 / 2.0);
    // Inverse map: Shear(-s) . R(-theta) . Z(1/zoom).
    let (sin, cos) = theta.sin_cos();
    let inv_z = 1.0 / zoom;
    // R(-theta) . Z(1/z)
    let (a, b) = (cos * inv_z, sin * inv_z);
    let (c, d) = (-sin * inv_z, cos * inv_z);
    // Shear(-s) on top: row 0 becomes (a - s*c, b - s*d).
    let m00 = a - shear * c;
    let m01 = b - shear * d;
    let (m10, m11) = (c, d);

    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        let oy = y as f32 - cy;
        for x in 0..w {
            let ox = x as f32 - cx;
            let sx = m00 * ox + m01 * oy + cx;
            let sy = m10 * ox + m11 * oy + cy;
            pixels.push(sample_black(img, sx, sy));
        }
    }
    GrayImage::new(w, h, pixels).expect("source pixels already in range")
}

/// Bilinear sample with zero outside the image.
fn sample_black(img: &GrayImage, x: f32, y: f32) -> f32 {
    let x0 = x.floor() as isize;
    let y0 = y.floor() as isize;
    let fx = x - x0 as f32;
    let fy = y - y0 as f32;
    let at = |ix: isize, iy: isize| -> f32 {
        if ix < 0 || iy < 0 || ix >= img.width() as isize || iy >= img.height() as isize {
            0.0
        } else {
            img.get(ix as usize, iy as usize)
        }
    };
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
    let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
    (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
}
