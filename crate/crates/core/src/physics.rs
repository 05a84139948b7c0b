//! Heat-diffusion regularization over predicted temperature sequences.
//!
//! The residual at interior index `t` of a predicted sequence `T̂` is
//!
//! ```text
//! r_t = (T̂[t+1] - T̂[t]) / Δt - α (T̂[t+1] - 2 T̂[t] + T̂[t-1])
//! ```
//!
//! and the physics loss is the mean of `r_t²` over the `N - 2` interior
//! points. `α` is a lumped diffusivity coefficient in normalized units: the
//! second difference carries no Δt² divisor, so α absorbs the discretization
//! scale and is tuned, not measured.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("sequence of length {len} is too short for the diffusion stencil (need >= 3)")]
    TooShort { len: usize },
    #[error("predictions ({predictions}) and targets ({targets}) differ in length")]
    LengthMismatch { predictions: usize, targets: usize },
}

/// Physics-loss configuration: lumped diffusivity, sample interval, weight λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsConfig<T> {
    pub alpha_diff: T,
    pub dt_s: T,
    pub lambda_weight: T,
}

impl<T: Scalar> Default for PhysicsConfig<T> {
    fn default() -> Self {
        Self {
            alpha_diff: T::from_f64_lossy(0.1),
            dt_s: T::from_f64_lossy(0.2),
            lambda_weight: T::from_f64_lossy(0.1),
        }
    }
}

impl<T: Scalar> PhysicsConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        if self.dt_s <= T::zero() {
            return Err(format!("dt_s must be positive, got {}", self.dt_s));
        }
        if self.alpha_diff < T::zero() || self.lambda_weight < T::zero() {
            return Err("alpha_diff and lambda_weight must be non-negative".into());
        }
        Ok(())
    }
}

/// Per-component loss values for one evaluation of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub data_loss: T,
    pub phys_loss: T,
    pub total: T,
    pub n_data: usize,
    pub n_residuals: usize,
}

/// Diffusion residuals on all interior points; returns `len - 2` values.
pub fn physics_residuals<T: Scalar>(
    t_hat: &[T],
    cfg: &PhysicsConfig<T>,
) -> Result<Vec<T>, PhysicsError> {
    let n = t_hat.len();
    if n < 3 {
        return Err(PhysicsError::TooShort { len: n });
    }
    let mut out = Vec::with_capacity(n - 2);
    for t in 1..n - 1 {
        let rate = (t_hat[t + 1] - t_hat[t]) / cfg.dt_s;
        let curvature = t_hat[t + 1] - (t_hat[t] + t_hat[t]) + t_hat[t - 1];
        out.push(rate - cfg.alpha_diff * curvature);
    }
    Ok(out)
}

/// Mean squared diffusion residual.
pub fn physics_loss<T: Scalar>(t_hat: &[T], cfg: &PhysicsConfig<T>) -> Result<T, PhysicsError> {
    let residuals = physics_residuals(t_hat, cfg)?;
    let count = T::from_f64_lossy(residuals.len() as f64);
    Ok(residuals.iter().map(|r| *r * *r).sum::<T>() / count)
}

/// Exact gradient of [`physics_loss`] with respect to each prediction.
///
/// Each `T̂[k]` appears in up to three residuals: as the forward point of
/// `r_{k-1}`, the center of `r_k`, and the backward point of `r_{k+1}`.
pub fn physics_loss_grad<T: Scalar>(
    t_hat: &[T],
    cfg: &PhysicsConfig<T>,
) -> Result<Vec<T>, PhysicsError> {
    let n = t_hat.len();
    let residuals = physics_residuals(t_hat, cfg)?;
    let scale = T::from_f64_lossy(2.0) / T::from_f64_lossy(residuals.len() as f64);
    let inv_dt = T::one() / cfg.dt_s;
    let alpha = cfg.alpha_diff;
    let two = T::from_f64_lossy(2.0);

    let mut grad = vec![T::zero(); n];
    for (idx, r) in residuals.iter().enumerate() {
        let t = idx + 1;
        let w = scale * *r;
        grad[t + 1] += w * (inv_dt - alpha);
        grad[t] += w * (two * alpha - inv_dt);
        grad[t - 1] += w * (-alpha);
    }
    Ok(grad)
}

/// Combined objective: data MSE plus λ times the mean physics loss over the
/// provided prediction sequences.
pub fn total_loss<T: Scalar>(
    predictions: &[T],
    targets: &[T],
    t_hat_sequences: &[&[T]],
    cfg: &PhysicsConfig<T>,
) -> Result<LossBreakdown<T>, PhysicsError> {
    if predictions.len() != targets.len() {
        return Err(PhysicsError::LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    let n_data = predictions.len();
    let data_loss = if n_data == 0 {
        T::zero()
    } else {
        predictions
            .iter()
            .zip(targets)
            .map(|(p, y)| (*p - *y) * (*p - *y))
            .sum::<T>()
            / T::from_f64_lossy(n_data as f64)
    };

    let mut phys_loss = T::zero();
    let mut n_residuals = 0;
    if !t_hat_sequences.is_empty() {
        for seq in t_hat_sequences {
            phys_loss += physics_loss(seq, cfg)?;
            n_residuals += seq.len() - 2;
        }
        phys_loss /= T::from_f64_lossy(t_hat_sequences.len() as f64);
    }

    Ok(LossBreakdown {
        data_loss,
        phys_loss,
        total: data_loss + cfg.lambda_weight * phys_loss,
        n_data,
        n_residuals,
    })
}
