//! Non-overlapping max pooling (stride = pool size).

use crate::tensor::Tensor;

use super::NnError;

/// Windowed maximum over `[N,C,H,W]`. Returns the pooled tensor and, per
/// output element, the flat index of its source element (the argmax), which
/// the backward pass routes gradient through. Ties break to the first
/// element in row-major window order.
pub fn maxpool_forward(
    x: &Tensor,
    pool_h: usize,
    pool_w: usize,
) -> Result<(Tensor, Vec<usize>), NnError> {
    let &[n, c, h, w] = x.dims() else {
        return Err(NnError::ShapeFlow {
            layer: 0,
            shape: x.dims().to_vec(),
            reason: "max pool expects [N,C,H,W]".into(),
        });
    };
    if h % pool_h != 0 || w % pool_w != 0 {
        return Err(NnError::PoolNotDivisible {
            ph: pool_h,
            pw: pool_w,
            h,
            w,
        });
    }
    let (oh, ow) = (h / pool_h, w / pool_w);
    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_at = 0;
                for py in 0..pool_h {
                    let row = base + (oy * pool_h + py) * w + ox * pool_w;
                    for px in 0..pool_w {
                        let v = xd[row + px];
                        if v > best {
                            best = v;
                            best_at = row + px;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_at);
            }
        }
    }
    Ok((Tensor::from_vec([n, c, oh, ow], out)?, argmax))
}

/// Route each upstream gradient to its cached argmax position.
pub fn maxpool_backward(
    in_dims: &[usize],
    argmax: &[usize],
    upstream: &Tensor,
) -> Result<Tensor, NnError> {
    let mut dx = vec![0.0f32; in_dims.iter().product()];
    for (&at, &g) in argmax.iter().zip(upstream.data()) {
        dx[at] += g;
    }
    Ok(Tensor::from_vec(in_dims.to_vec(), dx)?)
}
