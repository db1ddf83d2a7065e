//! Per-coefficient standardization fitted on training frames only.

use super::{AudioError, FeatureMatrix};

/// Column-wise mean/std scaler: `x' = (x - mean) / std`.
///
/// Statistics use the population definition (divide by N). Columns with
/// nearly zero spread keep their values unscaled rather than exploding.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    /// Fit over all rows of the given matrices stacked together.
    pub fn fit(matrices: &[&FeatureMatrix]) -> Result<Self, AudioError> {
        let cols = matrices
            .iter()
            .find(|m| m.rows > 0)
            .ok_or(AudioError::TooFewRows(0))?
            .cols;
        let n: usize = matrices.iter().map(|m| m.rows).sum();
        if n < 2 {
            return Err(AudioError::TooFewRows(n));
        }

        let mut mean = vec![0.0f64; cols];
        for m in matrices {
            if m.cols != cols {
                return Err(AudioError::WidthMismatch {
                    want: cols,
                    got: m.cols,
                });
            }
            for r in 0..m.rows {
                for (acc, v) in mean.iter_mut().zip(m.row(r)) {
                    *acc += v;
                }
            }
        }
        mean.iter_mut().for_each(|v| *v /= n as f64);

        let mut var = vec![0.0f64; cols];
        for m in matrices {
            for r in 0..m.rows {
                for ((acc, v), mu) in var.iter_mut().zip(m.row(r)).zip(&mean) {
                    let d = v - mu;
                    *acc += d * d;
                }
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(FeatureScaler { mean, std })
    }

    /// Standardize a matrix in place.
    pub fn apply(&self, m: &mut FeatureMatrix) -> Result<(), AudioError> {
        if m.cols != self.mean.len() {
            return Err(AudioError::WidthMismatch {
                want: self.mean.len(),
                got: m.cols,
            });
        }
        for r in 0..m.rows {
            for ((v, mu), sd) in m.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / sd;
            }
        }
        Ok(())
    }
}
