//! Adam: per-coordinate adaptive learning rates from exponentially decayed
//! first and second gradient moments, with bias correction.

use crate::tensor::Tensor;

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state: one moment pair per parameter tensor, in the order the
/// tensors were registered. The same order must be used on every step.
#[derive(Debug, Clone)]
pub struct AdamState {
    hyper: AdamHyper,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn new(params: &[&Tensor], hyper: AdamHyper) -> Self {
        assert!(hyper.beta1 > 0.0 && hyper.beta1 < 1.0, "beta1 in (0,1)");
        assert!(hyper.beta2 > 0.0 && hyper.beta2 < 1.0, "beta2 in (0,1)");
        AdamState {
            hyper,
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update. `params` and `grads` must appear in registration
    /// order; every shape must match its registered tensor.
    pub fn step(
        &mut self,
        params: Vec<&mut Tensor>,
        grads: &[Tensor],
    ) -> Result<(), TrainError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TrainError::OptimizerArity {
                want: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        for (param, grad) in params.iter().zip(grads) {
            if param.dims() != grad.dims() {
                return Err(TrainError::GradShape {
                    want: param.dims().to_vec(),
                    got: grad.dims().to_vec(),
                });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let b1 = self.hyper.beta1;
        let b2 = self.hyper.beta2;
        // Bias correction counteracts the zero initialization of the moments.
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);

        for ((param, grad), (m, v)) in params
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for ((theta, &g), (m_i, v_i)) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *m_i = b1 * *m_i + (1.0 - b1) * g;
                *v_i = b2 * *v_i + (1.0 - b2) * g * g;
                let m_hat = *m_i / c1;
                let v_hat = *v_i / c2;
                *theta -= self.hyper.lr * m_hat / (v_hat.sqrt() + self.hyper.epsilon);
            }
        }
        Ok(())
    }
}
