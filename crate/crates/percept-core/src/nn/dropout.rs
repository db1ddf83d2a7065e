//! Inverted dropout: zero with probability `rate`, scale survivors by
//! `1/(1-rate)` so the activation expectation is preserved.

use crate::rng::Prng;
use crate::tensor::Tensor;

use super::NnError;

/// Draw a dropout mask of `len` elements: each entry is either `0` or the
/// survivor scale `1/(1-rate)`. One PRNG draw per element, in index order,
/// independent of the values being masked — so the same seed reproduces the
/// same mask for any input.
pub fn dropout_mask(len: usize, rate: f32, prng: &mut Prng) -> Result<Vec<f32>, NnError> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(NnError::BadDropoutRate(rate));
    }
    let scale = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if prng.next_f32() < rate { 0.0 } else { scale })
        .collect())
}

/// Apply a previously drawn mask (train mode). Infer mode skips the layer
/// entirely — the identity contract lives in the network composition.
pub fn dropout_forward_with_mask(x: &Tensor, mask: &[f32]) -> Tensor {
    let mut y = x.clone();
    for (v, &m) in y.data_mut().iter_mut().zip(mask) {
        *v *= m;
    }
    y
}

pub fn dropout_backward(mask: &[f32], upstream: &Tensor) -> Tensor {
    dropout_forward_with_mask(upstream, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_bounds_enforced() {
        let mut prng = Prng::new(0);
        assert!(matches!(
            dropout_mask(4, 0.0, &mut prng),
            Err(NnError::BadDropoutRate(_))
        ));
        assert!(matches!(
            dropout_mask(4, 1.0, &mut prng),
            Err(NnError::BadDropoutRate(_))
        ));
    }

    #[test]
    fn expectation_preserved_at_scale() {
        let mut prng = Prng::new(99);
        let n = 100_000;
        let mask = dropout_mask(n, 0.5, &mut prng).unwrap();
        let x = Tensor::filled([n], 1.0).unwrap();
        let y = dropout_forward_with_mask(&x, &mask);
        let mean = y.sum() / n as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
    }

    #[test]
    fn mask_reproducible_and_value_independent() {
        let a = dropout_mask(64, 0.3, &mut Prng::new(17)).unwrap();
        let b = dropout_mask(64, 0.3, &mut Prng::new(17)).unwrap();
        assert_eq!(a, b);
        // Survivors carry exactly the inverse keep probability.
        let scale = 1.0 / 0.7;
        assert!(a.iter().all(|&m| m == 0.0 || m == scale));
    }

    #[test]
    fn backward_reuses_the_same_mask() {
        let mut prng = Prng::new(3);
        let mask = dropout_mask(8, 0.25, &mut prng).unwrap();
        let up = Tensor::filled([8], 2.0).unwrap();
        let dx = dropout_backward(&mask, &up);
        for (d, &m) in dx.data().iter().zip(&mask) {
            assert_eq!(*d, 2.0 * m);
        }
    }
}
