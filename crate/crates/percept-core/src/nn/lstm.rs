//! LSTM layer: gated cell step, sequence unrolling, and backpropagation
//! through time.
//!
//! Gate order is (i, f, g, o): input, forget, candidate, output. The cell
//! equations are the standard formulation:
//! `i = sigmoid(x W_i + h U_i + b_i)` (f, o likewise), `g = tanh(...)`,
//! `c_t = f * c_prev + i * g`, `h_t = o * tanh(c_t)`.

use crate::tensor::Tensor;

use super::NnError;

fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

/// One time step. Returns `(h_t, c_t, gates)` with post-activation gate
/// values cached for the backward pass.
#[allow(clippy::type_complexity)]
pub fn lstm_cell_step(
    x_t: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    w: &[Tensor; 4],
    u: &[Tensor; 4],
    b: &[Tensor; 4],
) -> Result<(Tensor, Tensor, [Tensor; 4]), NnError> {
    let mut gates: Vec<Tensor> = Vec::with_capacity(4);
    for k in 0..4 {
        let mut a = x_t.matmul(&w[k])?.add(&h_prev.matmul(&u[k])?)?;
        let units = b[k].len();
        for row in a.data_mut().chunks_exact_mut(units) {
            for (v, &bias) in row.iter_mut().zip(b[k].data()) {
                *v += bias;
            }
        }
        let activated = if k == 2 {
            a.map(f32::tanh) // candidate gate g
        } else {
            a.map(sigmoid)
        };
        gates.push(activated);
    }
    let [i, f, g, o]: [Tensor; 4] = gates.try_into().expect("four gates");

    let c = f.zip(c_prev, |fv, cv| fv * cv)?.add(&i.zip(&g, |iv, gv| iv * gv)?)?;
    let h = o.zip(&c, |ov, cv| ov * cv.tanh())?;
    Ok((h, c, [i, f, g, o]))
}

/// Everything the backward pass needs from one unrolled forward.
pub struct LstmCache {
    /// Original `[N,T,in]` input.
    pub input: Tensor,
    /// Post-activation (i, f, g, o) per step.
    pub gates: Vec<[Tensor; 4]>,
    /// Cell state per step.
    pub cells: Vec<Tensor>,
    /// Hidden state per step.
    pub hiddens: Vec<Tensor>,
}

/// Contiguous `[N,in]` slice of `[N,T,in]` at time `t`.
fn time_slice(x: &Tensor, t: usize) -> Tensor {
    let &[n, steps, width] = x.dims() else {
        unreachable!("validated rank 3")
    };
    let mut data = Vec::with_capacity(n * width);
    for img in 0..n {
        let at = (img * steps + t) * width;
        data.extend_from_slice(&x.data()[at..at + width]);
    }
    Tensor::from_vec([n, width], data).expect("slice dims")
}

/// Unroll over `t = 0..T` from zero initial state. Returns the last hidden
/// state `[N,units]`, or the full sequence `[N,T,units]` when
/// `return_sequence` is set.
pub fn lstm_sequence_forward(
    x: &Tensor,
    w: &[Tensor; 4],
    u: &[Tensor; 4],
    b: &[Tensor; 4],
    return_sequence: bool,
) -> Result<(Tensor, LstmCache), NnError> {
    let &[n, steps, _width] = x.dims() else {
        return Err(NnError::ShapeFlow {
            layer: 0,
            shape: x.dims().to_vec(),
            reason: "lstm expects [N,T,in]".into(),
        });
    };
    let units = w[0].dims()[1];
    let mut h = Tensor::zeros([n, units])?;
    let mut c = Tensor::zeros([n, units])?;
    let mut cache = LstmCache {
        input: x.clone(),
        gates: Vec::with_capacity(steps),
        cells: Vec::with_capacity(steps),
        hiddens: Vec::with_capacity(steps),
    };
    for t in 0..steps {
        let x_t = time_slice(x, t);
        let (h_t, c_t, gates) = lstm_cell_step(&x_t, &h, &c, w, u, b)?;
        h = h_t;
        c = c_t;
        cache.gates.push(gates);
        cache.cells.push(c.clone());
        cache.hiddens.push(h.clone());
    }

    let output = if return_sequence {
        // Interleave per-step [N,units] into [N,T,units].
        let mut data = vec![0.0f32; n * steps * units];
        for (t, h_t) in cache.hiddens.iter().enumerate() {
            for img in 0..n {
                let src = &h_t.data()[img * units..(img + 1) * units];
                let at = (img * steps + t) * units;
                data[at..at + units].copy_from_slice(src);
            }
        }
        Tensor::from_vec([n, steps, units], data)?
    } else {
        h
    };
    Ok((output, cache))
}

/// Backpropagation through time. `upstream` is `[N,units]` (last-output
/// mode) or `[N,T,units]` (sequence mode). Returns the twelve parameter
/// gradients in `trainable()` order (W i,f,g,o then U then b) and the input
/// gradient `[N,T,in]`.
pub fn lstm_backward(
    cache: &LstmCache,
    w: &[Tensor; 4],
    u: &[Tensor; 4],
    return_sequence: bool,
    upstream: &Tensor,
) -> Result<(Vec<Tensor>, Tensor), NnError> {
    let &[n, steps, width] = cache.input.dims() else {
        unreachable!("cache holds rank-3 input")
    };
    let units = w[0].dims()[1];

    // f64 accumulators across time steps.
    let mut d_w = vec![vec![0.0f64; width * units]; 4];
    let mut d_u = vec![vec![0.0f64; units * units]; 4];
    let mut d_b = vec![vec![0.0f64; units]; 4];
    let mut d_x = vec![0.0f32; n * steps * width];

    let zeros = Tensor::zeros([n, units])?;
    let mut dh_next = Tensor::zeros([n, units])?;
    let mut dc_next = Tensor::zeros([n, units])?;
    for t in (0..steps).rev() {
        let [i, f, g, o] = &cache.gates[t];
        let c_t = &cache.cells[t];
        let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &cache.hiddens[t - 1] } else { &zeros };

        // Upstream contribution at this step.
        let dh = if return_sequence {
            dh_next.add(&time_slice(upstream, t))?
        } else if t == steps - 1 {
            dh_next.add(upstream)?
        } else {
            dh_next.clone()
        };

        let tc = c_t.map(f32::tanh);
        let d_o = dh.zip(&tc, |a, b| a * b)?;
        let dc = dc_next.add(&dh.zip(&o.zip(&tc, |ov, t| ov * (1.0 - t * t))?, |a, b| a * b)?)?;

        let d_i = dc.zip(g, |a, b| a * b)?;
        let d_g = dc.zip(i, |a, b| a * b)?;
        let d_f = dc.zip(c_prev, |a, b| a * b)?;
        dc_next = dc.zip(f, |a, b| a * b)?;

        // Pre-activation gradients: sigmoid' = s(1-s), tanh' = 1 - g^2.
        let da = [
            d_i.zip(i, |d, s| d * s * (1.0 - s))?,
            d_f.zip(f, |d, s| d * s * (1.0 - s))?,
            d_g.zip(g, |d, gv| d * (1.0 - gv * gv))?,
            d_o.zip(o, |d, s| d * s * (1.0 - s))?,
        ];

        let x_t = time_slice(&cache.input, t);
        let x_t_t = x_t.transpose2()?;
        let h_prev_t = h_prev.transpose2()?;
        let mut dh_acc = Tensor::zeros([n, units])?;
        for k in 0..4 {
            let dwk = x_t_t.matmul(&da[k])?;
            for (acc, &v) in d_w[k].iter_mut().zip(dwk.data()) {
                *acc += v as f64;
            }
            let duk = h_prev_t.matmul(&da[k])?;
            for (acc, &v) in d_u[k].iter_mut().zip(duk.data()) {
                *acc += v as f64;
            }
            for row in da[k].data().chunks_exact(units) {
                for (acc, &v) in d_b[k].iter_mut().zip(row) {
                    *acc += v as f64;
                }
            }
            let dxk = da[k].matmul(&w[k].transpose2()?)?;
            for img in 0..n {
                let src = &dxk.data()[img * width..(img + 1) * width];
                let at = (img * steps + t) * width;
                for (dst, &v) in d_x[at..at + width].iter_mut().zip(src) {
                    *dst += v;
                }
            }
            dh_acc = dh_acc.add(&da[k].matmul(&u[k].transpose2()?)?)?;
        }
        dh_next = dh_acc;
    }

    let mut grads = Vec::with_capacity(12);
    for k in 0..4 {
        grads.push(Tensor::from_vec(
            [width, units],
            d_w[k].iter().map(|&v| v as f32).collect(),
        )?);
    }
    for k in 0..4 {
        grads.push(Tensor::from_vec(
            [units, units],
            d_u[k].iter().map(|&v| v as f32).collect(),
        )?);
    }
    for k in 0..4 {
        grads.push(Tensor::from_vec(
            [units],
            d_b[k].iter().map(|&v| v as f32).collect(),
        )?);
    }
    Ok((grads, Tensor::from_vec([n, steps, width], d_x)?))
}
