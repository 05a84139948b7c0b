//! Bias-corrected Adam over flat parameter vectors.

use crate::scalar::Scalar;

use super::NeuralError;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n_params: usize, lr: T) -> Self {
        Self {
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            step: 0,
            lr,
            beta1: T::from_f64_lossy(0.9),
            beta2: T::from_f64_lossy(0.999),
            eps: T::from_f64_lossy(1e-8),
        }
    }
}

/// One deterministic Adam update in place.
pub fn adam_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
) -> Result<(), NeuralError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(NeuralError::ShapeMismatch(format!(
            "params {}, grads {}, moments {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let one = T::one();
    let b1 = state.beta1;
    let b2 = state.beta2;
    let t = state.step as i32;
    let corr1 = one - b1.powi(t);
    let corr2 = one - b2.powi(t);
    for k in 0..params.len() {
        let g = grads[k];
        state.m[k] = b1 * state.m[k] + (one - b1) * g;
        state.v[k] = b2 * state.v[k] + (one - b2) * g * g;
        let m_hat = state.m[k] / corr1;
        let v_hat = state.v[k] / corr2;
        params[k] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}
