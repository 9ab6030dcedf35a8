//! Run artifacts: `report.json` and the CSV files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::Rows;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Default)]
pub struct AssumptionSection {
    pub plant_controllable_observable: bool,
    pub reference_not_decaying: bool,
    pub minimal_polynomial_annihilates: bool,
    pub no_blocking_zero: bool,
    pub augmented_stabilizable: bool,
    pub augmented_detectable: bool,
    pub augmented_controllable: bool,
    pub augmented_observable: bool,
    pub all_required_pass: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct OracleSection {
    /// DARE solution for the plant alone with weight `C'QC`.
    pub plant_p_star: Rows,
    pub p_star: Rows,
    pub k_star: Rows,
    pub k_star_m: Rows,
    pub dare_residual: f64,
    pub hewer_iterations: usize,
    pub monotonicity_gap: f64,
    pub regulator_residuals: [f64; 2],
    pub closed_loop_spectral_radius: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct LearningSection {
    pub init_mode: String,
    pub oracle_assisted_init: bool,
    pub solver: String,
    pub rank: usize,
    pub required_rank: usize,
    pub samples: usize,
    pub iterations: usize,
    pub final_gain_delta: f64,
    pub gain_err_vs_oracle: f64,
    pub k_o_star: Rows,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct TrackingSection {
    pub gain_source: String,
    pub steps: usize,
    pub initial_error: f64,
    pub trailing_window: usize,
    pub trailing_max_error: f64,
    pub ratio_to_initial: f64,
    pub settling_index: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub k0: usize,
    pub kernel_solution_error: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct RunReport {
    pub command: String,
    pub scenario: String,
    pub seed: u64,
    pub config_hash: String,
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub assumptions: AssumptionSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning: Option<LearningSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

/// Replaces non-finite numbers so the JSON stays valid; the report records
/// which fields were affected.
fn sanitize(v: &mut serde_json::Value, path: &str, bad: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, x) in map.iter_mut() {
                sanitize(x, &format!("{path}.{k}"), bad);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, x) in items.iter_mut().enumerate() {
                sanitize(x, &format!("{path}[{i}]"), bad);
            }
        }
        // serde_json turns NaN and infinities into null.
        serde_json::Value::Null if !path.ends_with(".error") && !path.ends_with("settling_index") => {
            bad.push(path.to_string());
        }
        _ => {}
    }
}

impl RunReport {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut value = serde_json::to_value(self).map_err(|e| CliError::Io(e.to_string()))?;
        let mut bad = Vec::new();
        sanitize(&mut value, "$", &mut bad);
        if !bad.is_empty() {
            value["non_finite_fields"] = serde_json::json!(bad);
        }
        let text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(dir.join("report.json"), text + "\n")?;
        Ok(())
    }
}

/// Full double precision, 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
