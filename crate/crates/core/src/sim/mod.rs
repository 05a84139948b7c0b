//! Synthetic abuse-test generator: phenomenological laws, least-squares
//! coefficient recovery, trace synthesis, and the scenario catalog.

mod catalog;
mod fit;
mod laws;
mod synth;

pub use catalog::{default_catalog, load_catalog, parse_catalog, write_catalog, CATALOG_FORMAT_TAG};
pub use fit::{fit_law, FitResult, LawKind};
pub use laws::{
    collapse_displacement_speed, collapse_time_position, failure_time_radius, mechanical_work,
    open_circuit_voltage, peak_force_position, peak_force_radius, peak_force_speed,
    peak_temperature_from_work, peak_temperature_from_work_at_speed, peak_temperature_soc,
    rate_efficiency, voltage_drop_soc, LawParams, RadiusForceForm,
};
pub use synth::{
    compose_outcome, synthesize, synthesize_trace, AbuseMode, AbuseScenario, NoiseStd,
    ScenarioOutcome, Synthesis, CELL_HEIGHT_MM, CELL_MID_HEIGHT_MM,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("speed must be positive")]
    NonPositiveSpeed,
    #[error("SOC must be positive")]
    NonPositiveSoc,
    #[error("failure time is non-positive at radius {radius_mm} mm")]
    NonPhysicalTime { radius_mm: f64 },
    #[error("displacement samples must be non-decreasing")]
    UnsortedDisplacement,
    #[error("least-squares system is singular or underdetermined")]
    SingularSystem,
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("bad catalog at line {line}: {msg}")]
    BadCatalog { line: usize, msg: String },
    #[error("bad scenario: {0}")]
    BadScenario(String),
    #[error("bad law params: {0}")]
    BadParams(String),
}
