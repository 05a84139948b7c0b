//! Plain-text scenario catalog: one scenario per record, versioned with a
//! format tag.
//!
//! ```text
//! pilstm-catalog v1
//! # id mode soc velocity_mm_min depth_mm position_mm radius_mm duration_s dt_s
//! Batt-1 cyl-indent 0.7 10 13 30 5 300 0.2
//! ```
//!
//! The position column accepts a number in mm, or `radial`/`axial`/`-` for
//! compression modes, which map to the cell mid-height.

use std::io::Write;
use std::path::Path;

use super::synth::{AbuseMode, AbuseScenario, NoiseStd, CELL_MID_HEIGHT_MM};
use super::SimError;

pub const CATALOG_FORMAT_TAG: &str = "pilstm-catalog v1";

/// Parses catalog text. Noise and seed are not part of the file format;
/// scenarios come back with zero noise and seed 0 for the caller to fill.
pub fn parse_catalog(text: &str) -> Result<Vec<AbuseScenario>, SimError> {
    let mut lines = text.lines().enumerate();
    let tag = loop {
        match lines.next() {
            Some((_, line)) if line.trim().is_empty() => continue,
            Some((_, line)) => break line.trim(),
            None => {
                return Err(SimError::BadCatalog { line: 0, msg: "empty catalog".into() });
            }
        }
    };
    if tag != CATALOG_FORMAT_TAG {
        return Err(SimError::BadCatalog {
            line: 1,
            msg: format!("expected format tag '{CATALOG_FORMAT_TAG}', found '{tag}'"),
        });
    }

    let mut scenarios = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(SimError::BadCatalog {
                line: idx + 1,
                msg: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        let bad = |msg: String| SimError::BadCatalog { line: idx + 1, msg };
        let num = |field: &str, name: &str| -> Result<f64, SimError> {
            field.parse::<f64>().map_err(|e| bad(format!("{name}: cannot parse '{field}': {e}")))
        };
        let mode = AbuseMode::from_token(fields[1])
            .ok_or_else(|| bad(format!("unknown mode '{}'", fields[1])))?;
        let position_mm = match fields[5] {
            "radial" | "axial" | "-" => CELL_MID_HEIGHT_MM,
            other => num(other, "position_mm")?,
        };
        let scenario = AbuseScenario {
            id: fields[0].to_string(),
            mode,
            soc_frac: num(fields[2], "soc")?,
            velocity_mm_min: num(fields[3], "velocity_mm_min")?,
            depth_mm: num(fields[4], "depth_mm")?,
            position_mm,
            radius_mm: num(fields[6], "radius_mm")?,
            duration_s: num(fields[7], "duration_s")?,
            dt_s: num(fields[8], "dt_s")?,
            noise_std: NoiseStd::default(),
            seed: 0,
        };
        scenario.validate()?;
        scenarios.push(scenario);
    }
    Ok(scenarios)
}

pub fn load_catalog(path: &Path) -> Result<Vec<AbuseScenario>, SimError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::BadCatalog { line: 0, msg: format!("{}: {e}", path.display()) })?;
    parse_catalog(&text)
}

pub fn write_catalog(scenarios: &[AbuseScenario], path: &Path) -> Result<(), SimError> {
    let mut out = String::new();
    out.push_str(CATALOG_FORMAT_TAG);
    out.push('\n');
    out.push_str("# id mode soc velocity_mm_min depth_mm position_mm radius_mm duration_s dt_s\n");
    for s in scenarios {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {}\n",
            s.id,
            s.mode.token(),
            s.soc_frac,
            s.velocity_mm_min,
            s.depth_mm,
            s.position_mm,
            s.radius_mm,
            s.duration_s,
            s.dt_s,
        ));
    }
    let mut file = std::fs::File::create(path)
        .map_err(|e| SimError::BadCatalog { line: 0, msg: format!("{}: {e}", path.display()) })?;
    file.write_all(out.as_bytes())
        .map_err(|e| SimError::BadCatalog { line: 0, msg: e.to_string() })?;
    Ok(())
}

/// The 13-battery test catalog: five cylindrical indentations at varying
/// SOC, speed, and position (Batt-6 is the tilted-indenter variant, run
/// with standard geometry), one spherical indentation, radial and axial
/// compression, and four nail penetrations.
pub fn default_catalog() -> Vec<AbuseScenario> {
    let mid = CELL_MID_HEIGHT_MM;
    let row = |id: &str,
               mode: AbuseMode,
               soc: f64,
               v: f64,
               depth: f64,
               pos: f64,
               r: f64,
               duration: f64| AbuseScenario {
        id: id.to_string(),
        mode,
        soc_frac: soc,
        velocity_mm_min: v,
        depth_mm: depth,
        position_mm: pos,
        radius_mm: r,
        duration_s: duration,
        dt_s: 0.2,
        noise_std: NoiseStd::default(),
        seed: 0,
    };
    vec![
        row("Batt-1", AbuseMode::CylIndent, 0.7, 10.0, 13.0, 30.0, 5.0, 300.0),
        row("Batt-2", AbuseMode::CylIndent, 1.0, 10.0, 13.0, 30.0, 5.0, 300.0),
        row("Batt-3", AbuseMode::CylIndent, 0.4, 20.0, 13.0, 30.0, 5.0, 300.0),
        row("Batt-4", AbuseMode::CylIndent, 0.2, 10.0, 13.0, 10.0, 5.0, 300.0),
        row("Batt-5", AbuseMode::CylIndent, 0.2, 10.0, 13.0, 55.0, 10.0, 300.0),
        row("Batt-6", AbuseMode::CylIndent, 0.3, 10.0, 13.0, 30.0, 5.0, 300.0),
        row("Batt-7", AbuseMode::SphIndent, 0.5, 10.0, 13.0, 30.0, 5.0, 300.0),
        row("Batt-8", AbuseMode::RadialCompress, 0.2, 2.0, 15.0, mid, 100.0, 600.0),
        row("Batt-9", AbuseMode::AxialCompress, 0.5, 10.0, 20.0, mid, 100.0, 300.0),
        row("Batt-10", AbuseMode::NailPenetration, 0.4, 20.0, 13.0, 10.0, 2.5, 150.0),
        row("Batt-11", AbuseMode::NailPenetration, 0.4, 20.0, 13.0, 55.0, 2.5, 150.0),
        row("Batt-12", AbuseMode::NailPenetration, 0.4, 20.0, 16.0, 30.0, 2.5, 150.0),
        row("Batt-13", AbuseMode::NailPenetration, 0.3, 20.0, 13.0, 30.0, 2.5, 150.0),
    ]
}
