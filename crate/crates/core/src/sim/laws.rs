//! Phenomenological mechanical/electrical/thermal laws for abuse tests.
//!
//! Every law is a pure, total function on its stated domain. Coefficients
//! live in [`LawParams`]; defaults are calibrated so the preset catalog
//! produces traces inside the documented feature ranges (force <= 10 kN,
//! voltage floor 2.5 V and peak temperature <= 140 °C for non-penetration
//! modes) while nail penetration exceeds 350 °C at moderate SOC.

use crate::scalar::Scalar;

use super::SimError;

/// Coefficients of the phenomenological laws.
///
/// `lambda_pos` governs the peak-force position decay and `lambda_pos_t`
/// the collapse-time position trend; they are kept independent because the
/// two trends need not share a magnitude. `alpha_w` is the mechanical-work
/// to temperature conversion coefficient, distinct from the diffusion
/// coefficient of the physics loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LawParams<T> {
    /// Maximum attainable peak force at the mechanically optimal position [kN].
    pub f_max: T,
    /// Peak-force decay rate per normalized axial distance (force law).
    pub lambda_pos: T,
    /// Collapse-time growth rate per normalized axial distance (time law).
    pub lambda_pos_t: T,
    /// Collapse-time baseline and positional sensitivity [s].
    pub t0_s: T,
    pub c_s: T,
    /// Peak-force decay rate per mm of indenter radius.
    pub lambda_r: T,
    /// Reference peak force at reference speed [kN].
    pub f0: T,
    /// Logarithmic rate sensitivity of peak force [kN per ln(v/v0)].
    pub k_log: T,
    /// Reference indenter speed [mm/min].
    pub v0: T,
    /// Energy-to-temperature conversion coefficient [°C/J].
    pub alpha_w: T,
    /// Conversion efficiency at reference speed and its rate sensitivity.
    pub eta0: T,
    pub c_eta: T,
    /// Collapse-displacement law coefficients [mm], quadratic in ln(v).
    pub a_u: T,
    pub b_u: T,
    pub c_u: T,
    /// Linear radius-force slope [kN/mm] for the linear approximation.
    pub k_r: T,
    /// Electrical failure-time sensitivity to indenter radius [s/mm].
    pub beta_r: T,
    /// Peak-temperature sensitivity to ln(SOC) [°C].
    pub k_soc: T,
    /// SOC anchoring the temperature law: `T_peak(soc_ref) = T0`.
    pub soc_ref: T,
    /// Baseline surface temperature [°C].
    pub t0_c: T,
    /// Voltage-drop slope [V per unit SOC].
    pub dv_per_soc: T,
    /// Electrical failure-time baseline for the radius law [s].
    pub t_collapse_base: T,
    /// Radius-force law form used in composition (exponential by default,
    /// linear selectable).
    pub radius_form: RadiusForceForm,
}

impl<T: Scalar> Default for LawParams<T> {
    fn default() -> Self {
        let c = T::from_f64_lossy;
        Self {
            f_max: c(4.77),
            lambda_pos: c(0.5),
            lambda_pos_t: c(0.6),
            t0_s: c(35.0),
            c_s: c(15.0),
            lambda_r: c(0.001),
            f0: c(4.77),
            k_log: c(0.05),
            v0: c(10.0),
            alpha_w: c(4.6),
            eta0: c(0.9),
            c_eta: c(0.02),
            a_u: c(8.0),
            b_u: c(1.5),
            c_u: c(-0.3),
            k_r: c(-4.77 * 0.001),
            beta_r: c(0.35),
            k_soc: c(520.0),
            soc_ref: c(0.2),
            t0_c: c(25.0),
            dv_per_soc: c(4.0),
            t_collapse_base: c(80.0),
            radius_form: RadiusForceForm::Exponential,
        }
    }
}

impl<T: Scalar> LawParams<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.f_max <= T::zero() {
            return Err(SimError::BadParams("f_max must be positive".into()));
        }
        if self.lambda_pos < T::zero() {
            return Err(SimError::BadParams("lambda_pos must be non-negative".into()));
        }
        if self.v0 <= T::zero() {
            return Err(SimError::BadParams("v0 must be positive".into()));
        }
        if self.soc_ref <= T::zero() {
            return Err(SimError::BadParams("soc_ref must be positive".into()));
        }
        if self.eta0 <= T::zero() || self.eta0 > T::one() {
            return Err(SimError::BadParams("eta0 must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Peak indentation force vs normalized axial distance from mid-height:
/// `F_max · exp(-λ_pos · x*)`.
pub fn peak_force_position<T: Scalar>(x_star: T, p: &LawParams<T>) -> T {
    p.f_max * (-p.lambda_pos * x_star).exp()
}

/// Voltage collapse time vs normalized axial distance:
/// `t0 + C · exp(λ_pos_t · x*)`. The exponent sign follows the source
/// trend as printed; flip it via a negative `lambda_pos_t` if needed.
pub fn collapse_time_position<T: Scalar>(x_star: T, p: &LawParams<T>) -> T {
    p.t0_s + p.c_s * (p.lambda_pos_t * x_star).exp()
}

/// Peak force vs indenter speed: `F0 + k_log · ln(v/v0)`.
pub fn peak_force_speed<T: Scalar>(v: T, p: &LawParams<T>) -> Result<T, SimError> {
    if v <= T::zero() {
        return Err(SimError::NonPositiveSpeed);
    }
    Ok(p.f0 + p.k_log * (v / p.v0).ln())
}

/// Trapezoidal integral of a sampled force-displacement curve up to `u_f`,
/// in joules (kN·mm = J).
pub fn mechanical_work<T: Scalar>(force_curve: &[(T, T)], u_f: T) -> Result<T, SimError> {
    let mut work = T::zero();
    let half = T::from_f64_lossy(0.5);
    for pair in force_curve.windows(2) {
        let (u0, f0) = pair[0];
        let (u1, f1) = pair[1];
        if u1 < u0 {
            return Err(SimError::UnsortedDisplacement);
        }
        if u0 >= u_f {
            break;
        }
        if u1 <= u_f {
            work += half * (f0 + f1) * (u1 - u0);
        } else {
            // Clip the final segment at u_f.
            let frac = (u_f - u0) / (u1 - u0);
            let f_at = f0 + (f1 - f0) * frac;
            work += half * (f0 + f_at) * (u_f - u0);
            break;
        }
    }
    Ok(work)
}

/// Rate-dependent conversion efficiency `η(v) = η0 + c_eta · ln(v/v0)`,
/// clamped to (0, 1].
pub fn rate_efficiency<T: Scalar>(v: T, p: &LawParams<T>) -> Result<T, SimError> {
    if v <= T::zero() {
        return Err(SimError::NonPositiveSpeed);
    }
    let eta = p.eta0 + p.c_eta * (v / p.v0).ln();
    Ok(eta.min(T::one()).max(T::from_f64_lossy(0.01)))
}

/// Peak temperature from mechanical work: `T0 + α_W · W`.
pub fn peak_temperature_from_work<T: Scalar>(w_joules: T, p: &LawParams<T>) -> T {
    p.t0_c + p.alpha_w * w_joules
}

/// Rate-adjusted variant: the conversion coefficient scales with
/// `η(v)/η0` so faster loading converts work into heat more efficiently.
pub fn peak_temperature_from_work_at_speed<T: Scalar>(
    w_joules: T,
    v: T,
    p: &LawParams<T>,
) -> Result<T, SimError> {
    let eta = rate_efficiency(v, p)?;
    Ok(p.t0_c + p.alpha_w * (eta / p.eta0) * w_joules)
}

/// Collapse displacement vs speed: `a + b·ln v + c·(ln v)²`.
pub fn collapse_displacement_speed<T: Scalar>(v: T, p: &LawParams<T>) -> Result<T, SimError> {
    if v <= T::zero() {
        return Err(SimError::NonPositiveSpeed);
    }
    let lv = v.ln();
    Ok(p.a_u + p.b_u * lv + p.c_u * lv * lv)
}

/// Which analytic form the radius-force law takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusForceForm {
    /// `F_max · exp(-λ_r · r)` (default).
    #[default]
    Exponential,
    /// `F0 + k_r · r`, first-order equivalent when `k_r = -F_max · λ_r`.
    Linear,
}

/// Peak force vs indenter radius, exponential or linear form.
pub fn peak_force_radius<T: Scalar>(r: T, p: &LawParams<T>, form: RadiusForceForm) -> T {
    match form {
        RadiusForceForm::Exponential => p.f_max * (-p.lambda_r * r).exp(),
        RadiusForceForm::Linear => p.f0 + p.k_r * r,
    }
}

/// Electrical failure time vs indenter radius: `t_base - β_r · r`.
pub fn failure_time_radius<T: Scalar>(r: T, p: &LawParams<T>) -> Result<T, SimError> {
    let t = p.t_collapse_base - p.beta_r * r;
    if t <= T::zero() {
        return Err(SimError::NonPhysicalTime { radius_mm: r.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(t)
}

/// Open-circuit voltage vs SOC over the cell's 2.5-4.2 V span.
pub fn open_circuit_voltage<T: Scalar>(soc: T) -> T {
    T::from_f64_lossy(2.5) + T::from_f64_lossy(1.7) * soc
}

/// Voltage drop at collapse: `dV_per_soc · soc`, capped at the pre-failure
/// open-circuit voltage.
pub fn voltage_drop_soc<T: Scalar>(soc: T, p: &LawParams<T>) -> T {
    (p.dv_per_soc * soc).min(open_circuit_voltage(soc))
}

/// Peak temperature vs SOC: `T0 + k_soc · ln(soc/soc_ref)`; `soc_ref`
/// anchors the law so it is positive and increasing above `soc_ref`.
pub fn peak_temperature_soc<T: Scalar>(soc: T, p: &LawParams<T>) -> Result<T, SimError> {
    if soc <= T::zero() {
        return Err(SimError::NonPositiveSoc);
    }
    Ok(p.t0_c + p.k_soc * (soc / p.soc_ref).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> LawParams<f64> {
        LawParams::default()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn position_force_at_origin_is_f_max() {
        assert_eq!(peak_force_position(0.0, &p()), p().f_max);
        assert!((p().f_max - 4.77).abs() < 1e-12);
    }

    #[test]
    fn position_force_direct_evaluation() {
        let mut params = p();
        params.f_max = 4.77;
        params.lambda_pos = 0.5;
        // high-precision oracle: 4.77 * exp(-0.5)
        let expected = 4.77 * (-0.5f64).exp();
        assert!(rel_close(peak_force_position(1.0, &params), expected, 1e-15));
        assert!((expected - 2.893).abs() < 5e-4);
    }

    #[test]
    fn collapse_time_position_cases() {
        let mut params = p();
        params.t0_s = 10.0;
        params.c_s = 5.0;
        params.lambda_pos_t = 0.5;
        assert_eq!(collapse_time_position(0.0, &params), 15.0);
        params.c_s = 0.0;
        assert_eq!(collapse_time_position(0.7, &params), 10.0);
        params.c_s = 5.0;
        let expected = 10.0 + 5.0 * (1.0f64).exp();
        assert!(rel_close(collapse_time_position(2.0, &params), expected, 1e-15));
        assert!((expected - 23.59).abs() < 5e-3);
    }

    #[test]
    fn speed_force_cases() {
        let mut params = p();
        params.f0 = 4.77;
        params.k_log = 0.02;
        assert_eq!(peak_force_speed(params.v0, &params).unwrap(), 4.77);
        let v = std::f64::consts::E * params.v0;
        assert!(rel_close(peak_force_speed(v, &params).unwrap(), 4.79, 1e-12));
        assert!(matches!(peak_force_speed(0.0, &params), Err(SimError::NonPositiveSpeed)));
    }

    #[test]
    fn mechanical_work_rectangle_triangle_and_empty() {
        // constant 2 kN over 3 mm -> 6 J
        let flat = [(0.0, 2.0), (1.5, 2.0), (3.0, 2.0)];
        assert!(rel_close(mechanical_work(&flat, 3.0).unwrap(), 6.0, 1e-15));
        // linear ramp 0 -> 4 kN over 2 mm -> 4 J
        let ramp = [(0.0, 0.0), (1.0, 2.0), (2.0, 4.0)];
        assert!(rel_close(mechanical_work(&ramp, 2.0).unwrap(), 4.0, 1e-15));
        assert_eq!(mechanical_work(&ramp, 0.0).unwrap(), 0.0);
        let unsorted = [(0.0, 1.0), (2.0, 1.0), (1.0, 1.0)];
        assert!(matches!(mechanical_work(&unsorted, 2.0), Err(SimError::UnsortedDisplacement)));
    }

    #[test]
    fn work_law_baseline() {
        assert_eq!(peak_temperature_from_work(0.0, &p()), p().t0_c);
        let t = peak_temperature_from_work_at_speed(10.0, p().v0, &p()).unwrap();
        assert!(rel_close(t, 25.0 + 4.6 * 10.0, 1e-15));
    }

    #[test]
    fn displacement_speed_cases() {
        let mut params = p();
        params.a_u = 10.0;
        params.b_u = 0.0;
        params.c_u = 0.0;
        assert_eq!(collapse_displacement_speed(3.0, &params).unwrap(), 10.0);

        params.b_u = 1.0;
        params.c_u = -0.2;
        let v = (2.0f64).exp(); // ln v = 2
        let expected = 10.0 + 2.0 - 0.2 * 4.0;
        assert!(rel_close(collapse_displacement_speed(v, &params).unwrap(), expected, 1e-12));
        assert!((expected - 11.2).abs() < 1e-12);

        // interior maximum at ln v = -b/(2c), checked against a grid search
        let v_opt = (-params.b_u / (2.0 * params.c_u)).exp();
        let peak = collapse_displacement_speed(v_opt, &params).unwrap();
        let best_grid = (1..4000)
            .map(|k| collapse_displacement_speed(k as f64 * 0.01, &params).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(peak >= best_grid - 1e-6);
    }

    #[test]
    fn radius_force_forms() {
        let params = p();
        // exponential form tends to f_max as r -> 0+
        assert!(rel_close(
            peak_force_radius(1e-12, &params, RadiusForceForm::Exponential),
            params.f_max,
            1e-9
        ));
        // linear form with positive slope grows with radius
        let mut lin = p();
        lin.k_r = 0.02;
        let f5 = peak_force_radius(5.0, &lin, RadiusForceForm::Linear);
        let f10 = peak_force_radius(10.0, &lin, RadiusForceForm::Linear);
        assert!(f10 > f5);
        // first-order agreement at r = 0 when f0 = f_max, k_r = -f_max * lambda_r
        let mut taylor = p();
        taylor.f0 = taylor.f_max;
        taylor.k_r = -taylor.f_max * taylor.lambda_r;
        let r = 1e-4;
        let exp_form = peak_force_radius(r, &taylor, RadiusForceForm::Exponential);
        let lin_form = peak_force_radius(r, &taylor, RadiusForceForm::Linear);
        assert!((exp_form - lin_form).abs() < 1e-9);
    }

    #[test]
    fn failure_time_radius_cases() {
        let mut params = p();
        params.t_collapse_base = 100.0;
        params.beta_r = 2.0;
        assert_eq!(failure_time_radius(10.0, &params).unwrap(), 80.0);
        params.beta_r = 0.0;
        assert_eq!(failure_time_radius(37.0, &params).unwrap(), 100.0);
        params.beta_r = 2.0;
        assert!(matches!(
            failure_time_radius(60.0, &params),
            Err(SimError::NonPhysicalTime { .. })
        ));
    }

    #[test]
    fn voltage_drop_cases() {
        let mut params = p();
        assert_eq!(voltage_drop_soc(0.0, &params), 0.0);
        assert_eq!(voltage_drop_soc(0.5, &params), 2.0);
        // cap at the 4.2 V maximum cell voltage
        params.dv_per_soc = 10.0;
        assert_eq!(voltage_drop_soc(1.0, &params), 4.2);
    }

    #[test]
    fn soc_temperature_cases() {
        let params = p();
        assert_eq!(peak_temperature_soc(params.soc_ref, &params).unwrap(), params.t0_c);
        let soc = std::f64::consts::E * params.soc_ref;
        assert!(rel_close(
            peak_temperature_soc(soc, &params).unwrap(),
            params.t0_c + params.k_soc,
            1e-12
        ));
        assert!(matches!(peak_temperature_soc(0.0, &params), Err(SimError::NonPositiveSoc)));
        // monotone increasing across the operating range
        let mut prev = f64::NEG_INFINITY;
        for soc in [0.2, 0.4, 0.6, 0.8, 1.0] {
            let t = peak_temperature_soc(soc, &params).unwrap();
            assert!(t > prev);
            prev = t;
        }
    }
}
