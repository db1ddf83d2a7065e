//! Bilinear resizing with align-corners sampling.

use super::{GrayImage, ImagingError};

/// Resize with bilinear interpolation.
///
/// Output pixel `d` samples source coordinate `d * (in - 1) / (out - 1)`
/// per axis; a 1-wide output samples the source center. Samples are taken
/// with edge clamping, and since interpolation weights are convex the output
/// range never exceeds the input range.
pub fn resize_bilinear(
    img: &GrayImage,
    out_w: usize,
    out_h: usize,
) -> Result<GrayImage, ImagingError> {
    if out_w == 0 || out_h == 0 {
        return Err(ImagingError::ZeroDimension);
    }
    let (in_w, in_h) = (img.width(), img.height());
    let map = |d: usize, out: usize, inn: usize| -> f32 {
        if out > 1 {
            d as f32 * (inn - 1) as f32 / (out - 1) as f32
        } else {
            (inn - 1) as f32 / 2.0
        }
    };

    let mut pixels = Vec::with_capacity(out_w * out_h);
    for dy in 0..out_h {
        let sy = map(dy, out_h, in_h);
        let y0 = (sy.floor() as usize).min(in_h - 1);
        let y1 = (y0 + 1).min(in_h - 1);
        let fy = sy - y0 as f32;
        for dx in 0..out_w {
            let sx = map(dx, out_w, in_w);
            let x0 = (sx.floor() as usize).min(in_w - 1);
            let x1 = (x0 + 1).min(in_w - 1);
            let fx = sx - x0 as f32;
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            pixels.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
        }
    }
    GrayImage::new(out_w, out_h, pixels)
}
