//! Least-squares recovery of law coefficients from (x, y) samples.
//!
//! Each law is fitted in its linearized space: log-transform for
//! exponential laws, ln-abscissa for logarithmic laws, and a quadratic in
//! ln(v) for the collapse-displacement law. The offset-exponential
//! collapse-time law profiles its rate: for a candidate rate the linear
//! coefficients solve in closed form, and a golden-section search refines
//! the rate on the profiled residual. Residuals are reported in original
//! units.

use crate::scalar::Scalar;

use super::SimError;

/// Law selector for [`fit_law`]. Variants carry the fixed reference values
/// the corresponding law is anchored to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawKind<T> {
    /// `y = F_max · exp(-λ · x)`; params `[F_max, λ]`.
    PeakForcePosition,
    /// `y = t0 + C · exp(λ · x)`; params `[t0, C, λ]`.
    CollapseTimePosition,
    /// `y = F0 + k · ln(v / v0)`; params `[F0, k]`.
    PeakForceSpeed { v0: T },
    /// `y = a + b · ln v + c · (ln v)²`; params `[a, b, c]`.
    CollapseDisplacementSpeed,
    /// `y = F0 + k_r · r`; params `[F0, k_r]`.
    PeakForceRadiusLinear,
    /// `y = t0 - β · r`; params `[t0, β]`.
    FailureTimeRadius,
    /// `y = T0 + k · ln(soc / soc_ref)`; params `[T0, k]`.
    PeakTemperatureSoc { soc_ref: T },
}

impl<T> LawKind<T> {
    pub fn coefficient_count(&self) -> usize {
        match self {
            LawKind::CollapseTimePosition | LawKind::CollapseDisplacementSpeed => 3,
            _ => 2,
        }
    }
}

/// Outcome of a least-squares law fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub params: Vec<T>,
    /// RMS residual in the law's original units.
    pub residual_rms: T,
    pub n_points: usize,
}

/// Fits the selected law to `(x, y)` samples.
pub fn fit_law<T: Scalar>(samples: &[(T, T)], law: LawKind<T>) -> Result<FitResult<T>, SimError> {
    if samples.len() < law.coefficient_count() {
        return Err(SimError::SingularSystem);
    }
    match law {
        LawKind::PeakForcePosition => {
            // ln y = ln F_max - λ x
            let transformed = log_ordinates(samples)?;
            let (intercept, slope) = fit_line(&transformed)?;
            let params = vec![intercept.exp(), -slope];
            finish(samples, params, |p, x| p[0] * (-p[1] * x).exp())
        }
        LawKind::CollapseTimePosition => fit_offset_exponential(samples),
        LawKind::PeakForceSpeed { v0 } => {
            let transformed = ln_abscissa(samples, v0)?;
            let (intercept, slope) = fit_line(&transformed)?;
            finish(samples, vec![intercept, slope], move |p, v| p[0] + p[1] * (v / v0).ln())
        }
        LawKind::CollapseDisplacementSpeed => {
            let z: Vec<(T, T)> = samples
                .iter()
                .map(|&(v, y)| {
                    if v <= T::zero() {
                        Err(SimError::DomainViolation("speed must be positive".into()))
                    } else {
                        Ok((v.ln(), y))
                    }
                })
                .collect::<Result<_, _>>()?;
            let params = fit_quadratic(&z)?;
            finish(samples, params, |p, v| {
                let lv = v.ln();
                p[0] + p[1] * lv + p[2] * lv * lv
            })
        }
        LawKind::PeakForceRadiusLinear => {
            let (intercept, slope) = fit_line(samples)?;
            finish(samples, vec![intercept, slope], |p, r| p[0] + p[1] * r)
        }
        LawKind::FailureTimeRadius => {
            let (intercept, slope) = fit_line(samples)?;
            finish(samples, vec![intercept, -slope], |p, r| p[0] - p[1] * r)
        }
        LawKind::PeakTemperatureSoc { soc_ref } => {
            let transformed = ln_abscissa(samples, soc_ref)?;
            let (intercept, slope) = fit_line(&transformed)?;
            finish(samples, vec![intercept, slope], move |p, soc| {
                p[0] + p[1] * (soc / soc_ref).ln()
            })
        }
    }
}

fn finish<T: Scalar>(
    samples: &[(T, T)],
    params: Vec<T>,
    model: impl Fn(&[T], T) -> T,
) -> Result<FitResult<T>, SimError> {
    let n = samples.len();
    let sq_sum: T = samples
        .iter()
        .map(|&(x, y)| {
            let r = y - model(&params, x);
            r * r
        })
        .sum();
    let rms = (sq_sum / T::from_f64_lossy(n as f64)).sqrt();
    Ok(FitResult { params, residual_rms: rms, n_points: n })
}

fn log_ordinates<T: Scalar>(samples: &[(T, T)]) -> Result<Vec<(T, T)>, SimError> {
    samples
        .iter()
        .map(|&(x, y)| {
            if y <= T::zero() {
                Err(SimError::DomainViolation("log-transform needs positive ordinates".into()))
            } else {
                Ok((x, y.ln()))
            }
        })
        .collect()
}

fn ln_abscissa<T: Scalar>(samples: &[(T, T)], x_ref: T) -> Result<Vec<(T, T)>, SimError> {
    samples
        .iter()
        .map(|&(x, y)| {
            if x <= T::zero() {
                Err(SimError::DomainViolation("ln-abscissa needs positive inputs".into()))
            } else {
                Ok(((x / x_ref).ln(), y))
            }
        })
        .collect()
}

/// Ordinary least squares `y = intercept + slope·x`.
fn fit_line<T: Scalar>(samples: &[(T, T)]) -> Result<(T, T), SimError> {
    let n = T::from_f64_lossy(samples.len() as f64);
    let sx: T = samples.iter().map(|&(x, _)| x).sum();
    let sy: T = samples.iter().map(|&(_, y)| y).sum();
    let mean_x = sx / n;
    let mean_y = sy / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for &(x, y) in samples {
        let dx = x - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    if sxx == T::zero() {
        return Err(SimError::SingularSystem);
    }
    let slope = sxy / sxx;
    Ok((mean_y - slope * mean_x, slope))
}

/// Least-squares quadratic `y = a + b·z + c·z²` via 3x3 normal equations.
fn fit_quadratic<T: Scalar>(samples: &[(T, T)]) -> Result<Vec<T>, SimError> {
    let mut m = [[T::zero(); 4]; 3];
    for &(z, y) in samples {
        let basis = [T::one(), z, z * z];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += basis[r] * basis[c];
            }
            m[r][3] += basis[r] * y;
        }
    }
    solve3(&mut m)
}

/// Gaussian elimination with partial pivoting on a 3x4 augmented system.
fn solve3<T: Scalar>(m: &mut [[T; 4]; 3]) -> Result<Vec<T>, SimError> {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| {
                m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        m.swap(col, pivot);
        let diag = m[col][col];
        if diag.abs() < T::from_f64_lossy(1e-12) {
            return Err(SimError::SingularSystem);
        }
        for row in 0..3 {
            if row == col {
                continue;
            }
            let factor = m[row][col] / diag;
            for k in col..4 {
                let v = m[col][k];
                m[row][k] -= factor * v;
            }
        }
    }
    Ok((0..3).map(|r| m[r][3] / m[r][r]).collect())
}

/// Fits `y = t0 + C·exp(λ·x)` by profiling λ: for fixed λ the pair
/// `(t0, C)` is an ordinary linear fit against `exp(λ·x)`, and the profiled
/// sum of squares is minimized over λ by bracketed golden-section search.
fn fit_offset_exponential<T: Scalar>(samples: &[(T, T)]) -> Result<FitResult<T>, SimError> {
    let xs: Vec<f64> = samples.iter().map(|&(x, _)| x.to_f64().unwrap()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, y)| y.to_f64().unwrap()).collect();
    let x_span = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if x_span <= 0.0 {
        return Err(SimError::SingularSystem);
    }

    let profile = |lambda: f64| -> Option<(f64, f64, f64)> {
        let basis: Vec<f64> = xs.iter().map(|&x| (lambda * x).exp()).collect();
        if basis.iter().any(|b| !b.is_finite()) {
            return None;
        }
        let pts: Vec<(f64, f64)> =
            basis.iter().cloned().zip(ys.iter().cloned()).collect();
        let (t0, c) = fit_line(&pts).ok()?;
        let ss: f64 = pts.iter().map(|&(b, y)| (y - (t0 + c * b)).powi(2)).sum();
        Some((ss, t0, c))
    };

    // Coarse scan over decay/growth rates scaled to the abscissa span,
    // then golden-section refinement around the best cell.
    let max_rate = 40.0 / x_span;
    let grid = 240;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=grid {
        let lambda = -max_rate + 2.0 * max_rate * k as f64 / grid as f64;
        if let Some((ss, _, _)) = profile(lambda) {
            if ss < best.0 {
                best = (ss, lambda);
            }
        }
    }
    let step = 2.0 * max_rate / grid as f64;
    let (mut lo, mut hi) = (best.1 - step, best.1 + step);
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        let s1 = profile(m1).map_or(f64::INFINITY, |(ss, _, _)| ss);
        let s2 = profile(m2).map_or(f64::INFINITY, |(ss, _, _)| ss);
        if s1 <= s2 {
            hi = m2;
        } else {
            lo = m1;
        }
        if hi - lo < 1e-14 * (1.0 + best.1.abs()) {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let (_, t0, c) = profile(lambda).ok_or(SimError::SingularSystem)?;

    let params = vec![T::from_f64_lossy(t0), T::from_f64_lossy(c), T::from_f64_lossy(lambda)];
    finish(samples, params, |p, x| p[0] + p[1] * (p[2] * x).exp())
}
