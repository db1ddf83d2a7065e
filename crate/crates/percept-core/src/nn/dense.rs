//! Fully connected layer: `y = x W + b`.

use crate::tensor::Tensor;

use super::NnError;

/// `x [N,in] -> [N,units]` with weight `[in,units]` and bias `[units]`.
pub fn dense_forward(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let mut y = x.matmul(weight)?;
    let units = bias.len();
    for row in y.data_mut().chunks_exact_mut(units) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Ok(y)
}

/// Gradients `(dW, db, dx)` given the cached input and upstream `[N,units]`.
pub fn dense_backward(
    x: &Tensor,
    weight: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let d_w = x.transpose2()?.matmul(upstream)?;
    let units = upstream.dims()[1];
    let mut d_b = vec![0.0f64; units];
    for row in upstream.data().chunks_exact(units) {
        for (acc, &g) in d_b.iter_mut().zip(row) {
            *acc += g as f64;
        }
    }
    let d_x = upstream.matmul(&weight.transpose2()?)?;
    Ok((
        d_w,
        Tensor::from_vec([units], d_b.iter().map(|&v| v as f32).collect())?,
        d_x,
    ))
}
