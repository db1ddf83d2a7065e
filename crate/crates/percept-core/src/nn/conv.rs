//! 2-D convolution (cross-correlation, no kernel flip) with valid or same
//! padding, plus its exact backward pass.
//!
//! The production forward path materializes patches (im2col) and runs a
//! small GEMM; [`conv2d_reference`] is the quadruple-nested-loop oracle.
//! Both accumulate each output element in f64 over `(channel, ky, kx)` in
//! ascending order starting from the bias, so their results are equal.

use crate::tensor::Tensor;

use super::{NnError, Padding};

/// Output spatial size and zero-padding amounts for one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub out_h: usize,
    pub out_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub pad_bottom: usize,
    pub pad_right: usize,
}

/// Compute output size and padding. `Valid` shrinks, `Same` pads to
/// `ceil(input / stride)` with any odd padding going to the bottom/right.
pub fn conv_output_geometry(
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: Padding,
) -> Result<ConvGeometry, NnError> {
    match padding {
        Padding::Valid => {
            if kh > h || kw > w {
                return Err(NnError::KernelTooLarge { kh, kw, h, w });
            }
            Ok(ConvGeometry {
                out_h: (h - kh) / stride + 1,
                out_w: (w - kw) / stride + 1,
                pad_top: 0,
                pad_left: 0,
                pad_bottom: 0,
                pad_right: 0,
            })
        }
        Padding::Same => {
            let out_h = h.div_ceil(stride);
            let out_w = w.div_ceil(stride);
            let pad_h = ((out_h - 1) * stride + kh).saturating_sub(h);
            let pad_w = ((out_w - 1) * stride + kw).saturating_sub(w);
            Ok(ConvGeometry {
                out_h,
                out_w,
                pad_top: pad_h / 2,
                pad_left: pad_w / 2,
                pad_bottom: pad_h - pad_h / 2,
                pad_right: pad_w - pad_w / 2,
            })
        }
    }
}

fn unpack_shapes(x: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<[usize; 7], NnError> {
    let (&[n, c, h, w], &[f, kc, kh, kw], &[bf]) = (x.dims(), kernels.dims(), bias.dims()) else {
        return Err(NnError::ShapeFlow {
            layer: 0,
            shape: x.dims().to_vec(),
            reason: "conv expects x [N,C,H,W], kernels [F,C,kh,kw], bias [F]".into(),
        });
    };
    if kc != c || bf != f {
        return Err(NnError::ShapeFlow {
            layer: 0,
            shape: x.dims().to_vec(),
            reason: format!(
                "kernels {:?} / bias {:?} inconsistent with {c} input channels",
                kernels.dims(),
                bias.dims()
            ),
        });
    }
    Ok([n, c, h, w, f, kh, kw])
}

/// Zero-pad the spatial dims of `x` according to `geo`, as f64.
fn pad_input(x: &[f32], n: usize, c: usize, h: usize, w: usize, geo: &ConvGeometry) -> (Vec<f64>, usize, usize) {
    let ph = h + geo.pad_top + geo.pad_bottom;
    let pw = w + geo.pad_left + geo.pad_right;
    let mut padded = vec![0.0f64; n * c * ph * pw];
    for img in 0..n * c {
        let src = &x[img * h * w..(img + 1) * h * w];
        let dst = &mut padded[img * ph * pw..(img + 1) * ph * pw];
        for row in 0..h {
            let d0 = (row + geo.pad_top) * pw + geo.pad_left;
            for col in 0..w {
                dst[d0 + col] = src[row * w + col] as f64;
            }
        }
    }
    (padded, ph, pw)
}

/// Patch matrix: row per output position `(n, oy, ox)`, column per
/// `(c, ky, kx)`, both lexicographic.
fn im2col(
    padded: &[f64],
    n: usize,
    c: usize,
    ph: usize,
    pw: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    let k = c * kh * kw;
    let mut cols = vec![0.0f64; n * out_h * out_w * k];
    let mut row = 0;
    for img in 0..n {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let base = &mut cols[row * k..(row + 1) * k];
                let mut at = 0;
                for ch in 0..c {
                    let plane = &padded[(img * c + ch) * ph * pw..(img * c + ch + 1) * ph * pw];
                    for ky in 0..kh {
                        let src = (oy * stride + ky) * pw + ox * stride;
                        base[at..at + kw].copy_from_slice(&plane[src..src + kw]);
                        at += kw;
                    }
                }
                row += 1;
            }
        }
    }
    cols
}

/// Cross-correlation forward: `x [N,C,H,W] -> [N,F,H',W']`.
pub fn conv2d_forward(
    x: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor, NnError> {
    let [n, c, h, w, f, kh, kw] = unpack_shapes(x, kernels, bias)?;
    let geo = conv_output_geometry(h, w, kh, kw, stride, padding)?;
    let (padded, ph, pw) = pad_input(x.data(), n, c, h, w, &geo);
    let cols = im2col(&padded, n, c, ph, pw, kh, kw, stride, geo.out_h, geo.out_w);

    let k = c * kh * kw;
    let m = n * geo.out_h * geo.out_w;
    let wdata = kernels.data();
    let bdata = bias.data();
    // Output layout [N,F,H',W']: out[(img*F + fi)*area + pos].
    let area = geo.out_h * geo.out_w;
    let mut out = vec![0.0f32; m * f];
    for row in 0..m {
        let patch = &cols[row * k..(row + 1) * k];
        let (img, pos) = (row / area, row % area);
        for fi in 0..f {
            let filt = &wdata[fi * k..(fi + 1) * k];
            let mut acc = bdata[fi] as f64;
            for (&p, &kv) in patch.iter().zip(filt) {
                acc += p * kv as f64;
            }
            out[(img * f + fi) * area + pos] = acc as f32;
        }
    }
    Ok(Tensor::from_vec([n, f, geo.out_h, geo.out_w], out)?)
}

/// Plain quadruple-nested-loop evaluation, kept as the arithmetic oracle.
pub fn conv2d_reference(
    x: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor, NnError> {
    let [n, c, h, w, f, kh, kw] = unpack_shapes(x, kernels, bias)?;
    let geo = conv_output_geometry(h, w, kh, kw, stride, padding)?;
    let xd = x.data();
    let wd = kernels.data();
    let mut out = vec![0.0f32; n * f * geo.out_h * geo.out_w];
    let mut at = 0;
    for img in 0..n {
        for fi in 0..f {
            for oy in 0..geo.out_h {
                for ox in 0..geo.out_w {
                    let mut acc = bias.data()[fi] as f64;
                    for ch in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - geo.pad_top as isize;
                                let ix = (ox * stride + kx) as isize - geo.pad_left as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue; // zero padding contributes nothing
                                }
                                let xv = xd[((img * c + ch) * h + iy as usize) * w + ix as usize];
                                let kv = wd[((fi * c + ch) * kh + ky) * kw + kx];
                                acc += xv as f64 * kv as f64;
                            }
                        }
                    }
                    out[at] = acc as f32;
                    at += 1;
                }
            }
        }
    }
    Ok(Tensor::from_vec([n, f, geo.out_h, geo.out_w], out)?)
}

/// Gradients of the convolution: `(d_kernels, d_bias, d_input)`.
pub fn conv2d_backward(
    x: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: Padding,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let [n, c, h, w, f, kh, kw] = unpack_shapes(x, kernels, bias)?;
    let geo = conv_output_geometry(h, w, kh, kw, stride, padding)?;
    let (padded, ph, pw) = pad_input(x.data(), n, c, h, w, &geo);
    let cols = im2col(&padded, n, c, ph, pw, kh, kw, stride, geo.out_h, geo.out_w);

    let k = c * kh * kw;
    let area = geo.out_h * geo.out_w;
    let m = n * area;
    let up = upstream.data();
    let wd = kernels.data();

    let mut d_bias = vec![0.0f64; f];
    let mut d_w = vec![0.0f64; f * k];
    let mut d_cols = vec![0.0f64; m * k];
    for row in 0..m {
        let (img, pos) = (row / area, row % area);
        let patch = &cols[row * k..(row + 1) * k];
        let dpatch = &mut d_cols[row * k..(row + 1) * k];
        for fi in 0..f {
            let dy = up[(img * f + fi) * area + pos] as f64;
            d_bias[fi] += dy;
            let filt = &wd[fi * k..(fi + 1) * k];
            let dfilt = &mut d_w[fi * k..(fi + 1) * k];
            for kk in 0..k {
                dfilt[kk] += dy * patch[kk];
                dpatch[kk] += dy * filt[kk] as f64;
            }
        }
    }

    // Scatter column gradients back into the (padded) input, then crop.
    let mut d_padded = vec![0.0f64; n * c * ph * pw];
    let mut row = 0;
    for img in 0..n {
        for oy in 0..geo.out_h {
            for ox in 0..geo.out_w {
                let dpatch = &d_cols[row * k..(row + 1) * k];
                let mut at = 0;
                for ch in 0..c {
                    let plane =
                        &mut d_padded[(img * c + ch) * ph * pw..(img * c + ch + 1) * ph * pw];
                    for ky in 0..kh {
                        let dst = (oy * stride + ky) * pw + ox * stride;
                        for kx in 0..kw {
                            plane[dst + kx] += dpatch[at];
                            at += 1;
                        }
                    }
                }
                row += 1;
            }
        }
    }
    let mut d_x = vec![0.0f32; n * c * h * w];
    for img in 0..n * c {
        let src = &d_padded[img * ph * pw..(img + 1) * ph * pw];
        let dst = &mut d_x[img * h * w..(img + 1) * h * w];
        for rowi in 0..h {
            let s0 = (rowi + geo.pad_top) * pw + geo.pad_left;
            for col in 0..w {
                dst[rowi * w + col] = src[s0 + col] as f32;
            }
        }
    }

    Ok((
        Tensor::from_vec([f, c, kh, kw], d_w.iter().map(|&v| v as f32).collect())?,
        Tensor::from_vec([f], d_bias.iter().map(|&v| v as f32).collect())?,
        Tensor::from_vec([n, c, h, w], d_x)?,
    ))
}
