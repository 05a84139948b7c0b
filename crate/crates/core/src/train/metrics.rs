//! The four regression metrics over denormalized temperatures.

use std::io::Write;
use std::path::Path;

use super::TrainError;

/// MAE, RMSE, MAPE, and R² of one prediction set, with a per-scenario
/// breakdown. R² is undefined for constant targets; that case is reported
/// through `degenerate_targets` rather than a number.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mae_c: f64,
    pub rmse_c: f64,
    pub mape_pct: f64,
    pub r2: Option<f64>,
    pub degenerate_targets: bool,
    /// Points excluded from MAPE because |target| < 1e-6.
    pub mape_excluded: usize,
    pub n_samples: usize,
    pub per_scenario: Vec<ScenarioMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMetrics {
    pub scenario: String,
    pub mae_c: f64,
    pub rmse_c: f64,
    pub r2: Option<f64>,
    pub n_samples: usize,
}

pub(crate) struct RawMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub mape_pct: f64,
    pub r2: Option<f64>,
    pub mape_excluded: usize,
}

/// Computes all four metrics on already-denormalized values.
pub(crate) fn compute_metrics(predictions: &[f64], targets: &[f64]) -> Result<RawMetrics, TrainError> {
    if predictions.len() != targets.len() || predictions.is_empty() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let n = predictions.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut ape_sum = 0.0;
    let mut ape_count = 0usize;
    for (&p, &t) in predictions.iter().zip(targets) {
        let err = t - p;
        abs_sum += err.abs();
        sq_sum += err * err;
        if t.abs() >= 1e-6 {
            ape_sum += (err / t).abs();
            ape_count += 1;
        }
    }
    let mae = abs_sum / n;
    let rmse = (sq_sum / n).sqrt();
    // power-mean inequality; holds for every report
    assert!(mae <= rmse + 1e-12, "MAE {mae} exceeded RMSE {rmse}");

    let mape_pct =
        if ape_count > 0 { 100.0 * ape_sum / ape_count as f64 } else { f64::NAN };

    let mean_t = targets.iter().sum::<f64>() / n;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean_t).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { Some(1.0 - sq_sum / ss_tot) } else { None };

    Ok(RawMetrics { mae, rmse, mape_pct, r2, mape_excluded: predictions.len() - ape_count })
}

/// Ranked model comparison in the shape (Model, MAE, RMSE, R²),
/// sorted by MAE ascending with name-order tie-breaking.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub model: String,
    pub mae_c: f64,
    pub rmse_c: f64,
    pub r2: Option<f64>,
    pub best_mae: bool,
    pub best_rmse: bool,
    pub best_r2: bool,
}

pub fn compare_models(reports: &[(String, MetricsReport)]) -> Result<ComparisonTable, TrainError> {
    if reports.len() < 2 {
        return Err(TrainError::NotEnoughReports { found: reports.len() });
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|(name, r)| ComparisonRow {
            model: name.clone(),
            mae_c: r.mae_c,
            rmse_c: r.rmse_c,
            r2: r.r2,
            best_mae: false,
            best_rmse: false,
            best_r2: false,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.mae_c.partial_cmp(&b.mae_c).unwrap_or(std::cmp::Ordering::Equal).then(a.model.cmp(&b.model))
    });
    let best_mae = rows.iter().map(|r| r.mae_c).fold(f64::INFINITY, f64::min);
    let best_rmse = rows.iter().map(|r| r.rmse_c).fold(f64::INFINITY, f64::min);
    let best_r2 = rows.iter().filter_map(|r| r.r2).fold(f64::NEG_INFINITY, f64::max);
    let mut flagged = (false, false, false);
    for row in &mut rows {
        // flag ties deterministically: only the first row in sort order wins
        if !flagged.0 && row.mae_c == best_mae {
            row.best_mae = true;
            flagged.0 = true;
        }
        if !flagged.1 && row.rmse_c == best_rmse {
            row.best_rmse = true;
            flagged.1 = true;
        }
        if !flagged.2 && row.r2 == Some(best_r2) {
            row.best_r2 = true;
            flagged.2 = true;
        }
    }
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "Model,MAE,RMSE,R2,best")?;
        for row in &self.rows {
            let r2 = row.r2.map_or("undefined".to_string(), |v| format!("{v:.6}"));
            let mut flags = Vec::new();
            if row.best_mae {
                flags.push("mae");
            }
            if row.best_rmse {
                flags.push("rmse");
            }
            if row.best_r2 {
                flags.push("r2");
            }
            writeln!(out, "{},{:.6},{:.6},{},{}", row.model, row.mae_c, row.rmse_c, r2, flags.join("+"))?;
        }
        out.flush()?;
        Ok(())
    }
}

impl MetricsReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "scenario,n,MAE,RMSE,MAPE_pct,R2")?;
        let r2 = self.r2.map_or("undefined".to_string(), |v| format!("{v:.6}"));
        writeln!(
            out,
            "ALL,{},{:.6},{:.6},{:.6},{}",
            self.n_samples, self.mae_c, self.rmse_c, self.mape_pct, r2
        )?;
        for s in &self.per_scenario {
            let r2 = s.r2.map_or("undefined".to_string(), |v| format!("{v:.6}"));
            writeln!(out, "{},{},{:.6},{:.6},,{}", s.scenario, s.n_samples, s.mae_c, s.rmse_c, r2)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_text(&self) -> String {
        let r2 = self.r2.map_or("undefined (constant targets)".to_string(), |v| format!("{v:.6}"));
        let mut text = format!(
            "samples: {}\nMAE:  {:.4} C\nRMSE: {:.4} C\nMAPE: {:.4} % ({} excluded)\nR2:   {}\n",
            self.n_samples, self.mae_c, self.rmse_c, self.mape_pct, self.mape_excluded, r2
        );
        if !self.per_scenario.is_empty() {
            text.push_str("per scenario:\n");
            for s in &self.per_scenario {
                text.push_str(&format!(
                    "  {:<10} n={:<6} MAE {:.4}  RMSE {:.4}\n",
                    s.scenario, s.n_samples, s.mae_c, s.rmse_c
                ));
            }
        }
        text
    }
}
