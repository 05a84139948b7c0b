//! Severity scoring and the three-level thermal-runaway warning ladder.
//!
//! Level 1 reacts to a sudden force step over a rolling baseline
//! (mechanical collision), level 2 to internal short-circuit evidence
//! (latched flag or an abrupt voltage-drop rate), and level 3 to the
//! 130 °C SEI-decomposition threshold. Levels escalate as a ratchet: each
//! fires at most once and never after a higher one, so the emitted list is
//! causally ordered and running on a truncated trace yields a prefix.

use std::collections::VecDeque;

use thiserror::Error;

use crate::data::{NormalizationParams, Trace, FEATURE_COUNT};
use crate::mat::Mat;
use crate::neural::Checkpoint;
use crate::sim::{compose_outcome, AbuseScenario, LawParams, ScenarioOutcome, SimError};
use crate::train::TrainError;

#[derive(Debug, Error)]
pub enum SafetyError {
    #[error("collapse time must be positive")]
    ZeroCollapseTime,
    #[error("invalid severity inputs: {0}")]
    BadInputs(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
}

/// Inputs of the combined severity index: the four failure metrics, their
/// normalization references, and the weighting coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeverityInputs {
    pub f_peak_kn: f64,
    pub t_peak_c: f64,
    pub delta_v_v: f64,
    pub t_collapse_s: f64,
    pub f_ref_kn: f64,
    pub t_ref_c: f64,
    pub dv_ref_v: f64,
    pub t_ref_s: f64,
    pub w_force: f64,
    pub w_temp: f64,
    pub w_volt: f64,
    pub w_time: f64,
}

/// Normalization references for the severity index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeverityRefs {
    pub f_ref_kn: f64,
    pub t_ref_c: f64,
    pub dv_ref_v: f64,
    pub t_ref_s: f64,
}

impl SeverityInputs {
    /// Equal weights (0.25 each) over the given outcome and references.
    pub fn from_outcome(outcome: &ScenarioOutcome, refs: &SeverityRefs) -> Self {
        Self {
            f_peak_kn: outcome.f_peak_kn,
            t_peak_c: outcome.t_peak_c,
            delta_v_v: outcome.delta_v_v,
            t_collapse_s: outcome.t_collapse_s,
            f_ref_kn: refs.f_ref_kn,
            t_ref_c: refs.t_ref_c,
            dv_ref_v: refs.dv_ref_v,
            t_ref_s: refs.t_ref_s,
            w_force: 0.25,
            w_temp: 0.25,
            w_volt: 0.25,
            w_time: 0.25,
        }
    }
}

/// Weighted normalized sum; collapse time enters inversely, so faster
/// collapse scores higher.
pub fn severity_index(inp: &SeverityInputs) -> Result<f64, SafetyError> {
    if inp.t_collapse_s <= 0.0 {
        return Err(SafetyError::ZeroCollapseTime);
    }
    if inp.f_ref_kn <= 0.0 || inp.t_ref_c <= 0.0 || inp.dv_ref_v <= 0.0 || inp.t_ref_s <= 0.0 {
        return Err(SafetyError::BadInputs("references must be positive".into()));
    }
    if [inp.w_force, inp.w_temp, inp.w_volt, inp.w_time].iter().any(|w| *w < 0.0) {
        return Err(SafetyError::BadInputs("weights must be non-negative".into()));
    }
    Ok(inp.w_force * inp.f_peak_kn / inp.f_ref_kn
        + inp.w_temp * inp.t_peak_c / inp.t_ref_c
        + inp.w_volt * inp.delta_v_v / inp.dv_ref_v
        + inp.w_time * inp.t_ref_s / inp.t_collapse_s)
}

/// Default references: the documented feature maxima (10 kN, 140 °C,
/// 4.2 V) and the median collapse time of the noiseless preset catalog.
pub fn default_severity_refs(p: &LawParams<f64>) -> Result<SeverityRefs, SafetyError> {
    let mut times: Vec<f64> = crate::sim::default_catalog()
        .iter()
        .map(|s| compose_outcome(s, p).map(|o| o.t_collapse_s))
        .collect::<Result<_, _>>()?;
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite collapse times"));
    let t_ref_s = times[times.len() / 2];
    Ok(SeverityRefs { f_ref_kn: 10.0, t_ref_c: 140.0, dv_ref_v: 4.2, t_ref_s })
}

/// Severity as a function of SOC for a scenario template, evaluated on the
/// noiseless composed outcomes.
pub fn severity_vs_soc(
    template: &AbuseScenario,
    p: &LawParams<f64>,
    refs: &SeverityRefs,
    soc_grid: &[f64],
) -> Result<Vec<(f64, f64)>, SafetyError> {
    let mut out = Vec::with_capacity(soc_grid.len());
    for &soc in soc_grid {
        if soc <= 0.0 {
            return Err(SafetyError::Sim(SimError::NonPositiveSoc));
        }
        let mut scenario = template.clone();
        scenario.soc_frac = soc;
        let outcome = compose_outcome(&scenario, p)?;
        let s = severity_index(&SeverityInputs::from_outcome(&outcome, refs))?;
        out.push((soc, s));
    }
    Ok(out)
}

/// Alarm cause per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarnCause {
    MechanicalCollision,
    InternalShortCircuit,
    SeiDecompositionThreshold,
}

impl WarnCause {
    pub fn name(&self) -> &'static str {
        match self {
            WarnCause::MechanicalCollision => "mechanical_collision",
            WarnCause::InternalShortCircuit => "internal_short_circuit",
            WarnCause::SeiDecompositionThreshold => "sei_decomposition_threshold",
        }
    }
}

/// One alarm of the three-level ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarningEvent {
    pub level: u8,
    pub time_s: f64,
    pub trigger_value: f64,
    pub cause: WarnCause,
}

/// Detector configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarnThresholds {
    /// Force step over the rolling baseline that counts as a collision.
    pub collision_step_kn: f64,
    /// Rolling-baseline length in samples (mean of the preceding window).
    pub collision_window: usize,
    /// Per-sample voltage change at or below which an ISC is declared.
    pub isc_rate_v_per_sample: f64,
    /// Whether the ground-truth short-circuit flag also declares an ISC.
    pub use_short_circuit_flag: bool,
    /// SEI decomposition temperature; the comparison is inclusive.
    pub sei_temperature_c: f64,
}

impl Default for WarnThresholds {
    fn default() -> Self {
        Self {
            collision_step_kn: 0.5,
            collision_window: 25,
            isc_rate_v_per_sample: -0.5,
            use_short_circuit_flag: true,
            sei_temperature_c: 130.0,
        }
    }
}

/// Runs the reactive three-level ladder over a measured or synthetic trace.
/// Returns an empty list for benign traces.
pub fn warn(trace: &Trace, thresholds: &WarnThresholds) -> Vec<WarningEvent> {
    let mut events = Vec::new();
    let mut max_fired = 0u8;
    let window = thresholds.collision_window.max(1);
    let mut rolling_sum = 0.0;
    let mut rolling: VecDeque<f64> = VecDeque::with_capacity(window);

    for k in 0..trace.len() {
        let time = trace.time_s[k];

        // level 3: SEI decomposition threshold (inclusive)
        if max_fired < 3 && trace.temperature_c[k] >= thresholds.sei_temperature_c {
            events.push(WarningEvent {
                level: 3,
                time_s: time,
                trigger_value: trace.temperature_c[k],
                cause: WarnCause::SeiDecompositionThreshold,
            });
            max_fired = 3;
        }

        // level 2: internal short circuit
        if max_fired < 2 {
            let flag = thresholds.use_short_circuit_flag && trace.short_circuit_at(k);
            let rate = k > 0
                && trace.voltage_v[k] - trace.voltage_v[k - 1] <= thresholds.isc_rate_v_per_sample;
            if flag || rate {
                events.push(WarningEvent {
                    level: 2,
                    time_s: time,
                    trigger_value: trace.voltage_v[k],
                    cause: WarnCause::InternalShortCircuit,
                });
                max_fired = 2;
            }
        }

        // level 1: force step over the rolling baseline
        if max_fired < 1 && rolling.len() >= window.min(5) {
            let baseline = rolling_sum / rolling.len() as f64;
            if trace.force_kn[k] - baseline > thresholds.collision_step_kn {
                events.push(WarningEvent {
                    level: 1,
                    time_s: time,
                    trigger_value: trace.force_kn[k],
                    cause: WarnCause::MechanicalCollision,
                });
                max_fired = 1;
            }
        }

        rolling.push_back(trace.force_kn[k]);
        rolling_sum += trace.force_kn[k];
        if rolling.len() > window {
            rolling_sum -= rolling.pop_front().expect("non-empty rolling window");
        }
    }
    events
}

/// A predictive level-3 alarm: raised at `time_s` because the forecast
/// crosses the SEI threshold `lead_s` seconds ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveEvent {
    pub time_s: f64,
    pub predicted_crossing_s: f64,
    pub lead_s: f64,
    pub predicted_temperature_c: f64,
}

/// Streams windows through a checkpoint and raises the level-3 alarm as
/// soon as any forecast step crosses the SEI threshold. Maintains one
/// stream's state: the window buffer and the fired latch.
pub struct PredictiveWarner {
    ckpt: Checkpoint,
    thresholds: WarnThresholds,
    horizon: usize,
    rows: VecDeque<Vec<f64>>,
    fired: bool,
}

impl PredictiveWarner {
    pub fn new(ckpt: Checkpoint, thresholds: WarnThresholds, horizon: usize) -> Self {
        Self { ckpt, thresholds, horizon, rows: VecDeque::new(), fired: false }
    }

    pub fn norm(&self) -> &NormalizationParams {
        &self.ckpt.norm
    }

    /// Feeds one raw feature row (canonical channel order). Returns an
    /// event when the forecast first crosses the threshold; `None` during
    /// warm-up (fewer than `n` rows seen) or after the alarm has fired.
    pub fn push_row(
        &mut self,
        raw_row: &[f64; FEATURE_COUNT],
        time_s: f64,
        dt_s: f64,
    ) -> Result<Option<PredictiveEvent>, SafetyError> {
        let normalized: Vec<f64> =
            (0..FEATURE_COUNT).map(|c| self.ckpt.norm.normalize_value(c, raw_row[c])).collect();
        self.rows.push_back(normalized);
        if self.rows.len() > self.ckpt.window_n {
            self.rows.pop_front();
        }
        if self.fired || self.rows.len() < self.ckpt.window_n {
            return Ok(None);
        }

        let window = Mat::from_rows(self.rows.iter().cloned().collect());
        let preds = self.ckpt.predict_multi(&window, self.horizon)?;
        let channel = self.ckpt.target_channel;
        for (step, &p) in preds.iter().enumerate() {
            let temperature = self.ckpt.norm.denormalize_value(channel, p);
            if temperature >= self.thresholds.sei_temperature_c {
                self.fired = true;
                let lead = (step + 1) as f64 * dt_s;
                return Ok(Some(PredictiveEvent {
                    time_s,
                    predicted_crossing_s: time_s + lead,
                    lead_s: lead,
                    predicted_temperature_c: temperature,
                }));
            }
        }
        Ok(None)
    }

    /// Convenience driver: streams a whole trace row by row.
    pub fn run_over_trace(&mut self, trace: &Trace) -> Result<Vec<PredictiveEvent>, SafetyError> {
        let dt = trace.dt_s.unwrap_or(1.0);
        let mut events = Vec::new();
        for k in 0..trace.len() {
            let row = [
                trace.soc_frac[k],
                trace.speed_mm_min[k],
                trace.force_kn[k],
                trace.voltage_v[k],
                trace.temperature_c[k],
                trace.short_circuit[k],
            ];
            if let Some(event) = self.push_row(&row, trace.time_s[k], dt)? {
                events.push(event);
            }
        }
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{default_catalog, synthesize, AbuseMode, NoiseStd};

    fn refs() -> SeverityRefs {
        SeverityRefs { f_ref_kn: 10.0, t_ref_c: 140.0, dv_ref_v: 4.2, t_ref_s: 50.0 }
    }

    #[test]
    fn unit_ratios_give_unit_severity() {
        let inp = SeverityInputs {
            f_peak_kn: 10.0,
            t_peak_c: 140.0,
            delta_v_v: 4.2,
            t_collapse_s: 50.0,
            f_ref_kn: 10.0,
            t_ref_c: 140.0,
            dv_ref_v: 4.2,
            t_ref_s: 50.0,
            w_force: 0.25,
            w_temp: 0.25,
            w_volt: 0.25,
            w_time: 0.25,
        };
        assert!((severity_index(&inp).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn halving_collapse_time_doubles_its_term() {
        let mut inp = SeverityInputs {
            f_peak_kn: 0.0,
            t_peak_c: 0.0,
            delta_v_v: 0.0,
            t_collapse_s: 50.0,
            f_ref_kn: 10.0,
            t_ref_c: 140.0,
            dv_ref_v: 4.2,
            t_ref_s: 50.0,
            w_force: 0.0,
            w_temp: 0.0,
            w_volt: 0.0,
            w_time: 1.0,
        };
        let base = severity_index(&inp).unwrap();
        inp.t_collapse_s = 25.0;
        assert!((severity_index(&inp).unwrap() - 2.0 * base).abs() < 1e-12);
    }

    #[test]
    fn severity_is_linear_in_each_weight() {
        let mut inp = SeverityInputs {
            f_peak_kn: 4.0,
            t_peak_c: 120.0,
            delta_v_v: 2.0,
            t_collapse_s: 40.0,
            f_ref_kn: 10.0,
            t_ref_c: 140.0,
            dv_ref_v: 4.2,
            t_ref_s: 50.0,
            w_force: 0.25,
            w_temp: 0.25,
            w_volt: 0.25,
            w_time: 0.25,
        };
        let base = severity_index(&inp).unwrap();
        inp.w_force *= 2.0;
        let bumped = severity_index(&inp).unwrap();
        let force_term = 0.25 * 4.0 / 10.0;
        assert!((bumped - base - force_term).abs() < 1e-12);
    }

    #[test]
    fn zero_collapse_time_rejected() {
        let mut inp = SeverityInputs::from_outcome(
            &ScenarioOutcome {
                f_peak_kn: 1.0,
                t_peak_c: 100.0,
                delta_v_v: 1.0,
                t_collapse_s: 0.0,
                u_collapse_mm: 1.0,
                work_j: 1.0,
            },
            &refs(),
        );
        inp.t_collapse_s = 0.0;
        assert!(matches!(severity_index(&inp), Err(SafetyError::ZeroCollapseTime)));
    }

    #[test]
    fn preset_severity_ordering_matches_failure_narrative() {
        let p = LawParams::default();
        let refs = default_severity_refs(&p).unwrap();
        let s = |id: &str| {
            let scenario = default_catalog().into_iter().find(|s| s.id == id).unwrap();
            let outcome = compose_outcome(&scenario, &p).unwrap();
            severity_index(&SeverityInputs::from_outcome(&outcome, &refs)).unwrap()
        };
        let nail = s("Batt-12");
        let axial = s("Batt-9");
        let radial = s("Batt-8");
        assert!(nail > axial, "nail {nail} vs axial {axial}");
        assert!(axial > radial, "axial {axial} vs radial {radial}");
    }

    #[test]
    fn severity_vs_soc_is_strictly_increasing_for_nail_template() {
        let p = LawParams::default();
        let refs = default_severity_refs(&p).unwrap();
        let template =
            default_catalog().into_iter().find(|s| s.mode == AbuseMode::NailPenetration).unwrap();
        let pairs =
            severity_vs_soc(&template, &p, &refs, &[0.2, 0.4, 0.6, 0.8]).unwrap();
        for pair in pairs.windows(2) {
            assert!(pair[1].1 > pair[0].1, "{pairs:?}");
        }

        let single = severity_vs_soc(&template, &p, &refs, &[0.5]).unwrap();
        assert_eq!(single.len(), 1);

        assert!(matches!(
            severity_vs_soc(&template, &p, &refs, &[0.0]),
            Err(SafetyError::Sim(SimError::NonPositiveSoc))
        ));
    }

    fn benign_trace(n: usize) -> Trace {
        Trace {
            time_s: (0..n).map(|k| k as f64 * 0.2).collect(),
            soc_frac: vec![0.5; n],
            speed_mm_min: vec![10.0; n],
            force_kn: vec![0.1; n],
            voltage_v: vec![3.6; n],
            temperature_c: vec![25.0; n],
            short_circuit: vec![0.0; n],
            dt_s: Some(0.2),
        }
    }

    #[test]
    fn benign_trace_emits_nothing() {
        let events = warn(&benign_trace(100), &WarnThresholds::default());
        assert!(events.is_empty());
    }

    #[test]
    fn force_step_fires_level_one_only() {
        let mut trace = benign_trace(100);
        for k in 50..100 {
            trace.force_kn[k] = 2.0;
        }
        let events = warn(&trace, &WarnThresholds::default());
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].level, 1);
        assert_eq!(events[0].cause, WarnCause::MechanicalCollision);
        assert_eq!(events[0].time_s, trace.time_s[50]);
    }

    #[test]
    fn max_temperature_below_threshold_never_fires_level_three() {
        let mut trace = benign_trace(100);
        for k in 0..100 {
            trace.temperature_c[k] = 80.0;
        }
        let events = warn(&trace, &WarnThresholds::default());
        assert!(events.iter().all(|e| e.level != 3));
    }

    #[test]
    fn exact_threshold_fires_inclusively() {
        let mut trace = benign_trace(100);
        trace.temperature_c[70] = 130.0;
        for k in 71..100 {
            trace.temperature_c[k] = 129.0;
        }
        let events = warn(&trace, &WarnThresholds::default());
        let l3: Vec<_> = events.iter().filter(|e| e.level == 3).collect();
        assert_eq!(l3.len(), 1);
        assert_eq!(l3[0].time_s, trace.time_s[70]);
        assert_eq!(l3[0].trigger_value, 130.0);
    }

    #[test]
    fn ladder_fires_each_level_once_in_order() {
        let p = LawParams::default();
        let mut scenario = default_catalog().into_iter().find(|s| s.id == "Batt-9").unwrap();
        scenario.noise_std = NoiseStd::default();
        let synth = synthesize(&scenario, &p).unwrap();
        let events = warn(&synth.trace, &WarnThresholds::default());
        // levels strictly escalate and are unique
        for pair in events.windows(2) {
            assert!(pair[0].level < pair[1].level);
            assert!(pair[0].time_s <= pair[1].time_s);
        }
        let l3: Vec<_> = events.iter().filter(|e| e.level == 3).collect();
        assert_eq!(l3.len(), 1);
        // first 130 °C crossing sample matches the event
        let first_crossing =
            (0..synth.trace.len()).find(|&k| synth.trace.temperature_c[k] >= 130.0).unwrap();
        assert_eq!(l3[0].time_s, synth.trace.time_s[first_crossing]);
    }

    #[test]
    fn truncated_trace_yields_event_prefix() {
        let p = LawParams::default();
        let mut scenario = default_catalog().into_iter().find(|s| s.id == "Batt-12").unwrap();
        scenario.noise_std = NoiseStd::scaled(1.0);
        scenario.seed = 5;
        let full = synthesize(&scenario, &p).unwrap().trace;
        let full_events = warn(&full, &WarnThresholds::default());
        assert!(!full_events.is_empty());

        let cut = full.len() / 2;
        let truncated = Trace {
            time_s: full.time_s[..cut].to_vec(),
            soc_frac: full.soc_frac[..cut].to_vec(),
            speed_mm_min: full.speed_mm_min[..cut].to_vec(),
            force_kn: full.force_kn[..cut].to_vec(),
            voltage_v: full.voltage_v[..cut].to_vec(),
            temperature_c: full.temperature_c[..cut].to_vec(),
            short_circuit: full.short_circuit[..cut].to_vec(),
            dt_s: full.dt_s,
        };
        let prefix_events = warn(&truncated, &WarnThresholds::default());
        assert!(prefix_events.len() <= full_events.len());
        for (a, b) in prefix_events.iter().zip(&full_events) {
            assert_eq!(a, b);
        }
        // causality: every event time lies within the truncated range
        for e in &prefix_events {
            assert!(e.time_s <= truncated.time_s[cut - 1]);
        }
    }
}
