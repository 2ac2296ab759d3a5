//! Artifact writers: trajectory CSV and run/sweep summary JSON.

use std::fs;
use std::io::Write;
use std::path::Path;

use fairgrad::types::{ExperimentConfig, TrajectoryRecord};
use serde::{Deserialize, Serialize};

/// Formats one float for the trajectory CSV: 17 significant digits in
/// scientific notation, so values round-trip losslessly. `NaN` prints as
/// `NaN`.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

/// Writes the trajectory CSV with the exact header
/// `step,x1..xm,l1..lK,w1..wK,dnorm,stationarity,sigma_min,eta`.
pub fn write_trajectory_csv(
    path: &Path,
    dim: usize,
    tasks: usize,
    records: &[TrajectoryRecord],
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str("step");
    for i in 1..=dim {
        out.push_str(&format!(",x{i}"));
    }
    for i in 1..=tasks {
        out.push_str(&format!(",l{i}"));
    }
    for i in 1..=tasks {
        out.push_str(&format!(",w{i}"));
    }
    out.push_str(",dnorm,stationarity,sigma_min,eta\n");
    for record in records {
        out.push_str(&record.step.to_string());
        for v in record.point.iter() {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        for v in record.losses.iter() {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        for v in record.weights.iter() {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push(',');
        out.push_str(&format_float(record.direction_norm));
        out.push(',');
        out.push_str(&format_float(record.stationarity));
        out.push(',');
        out.push_str(&format_float(record.sigma_min));
        out.push(',');
        out.push_str(&format_float(record.step_size));
        out.push('\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())
}

/// Everything `run` reports about one finished experiment.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start: Option<String>,
    pub config: ExperimentConfig,
    pub final_point: Vec<f64>,
    pub final_losses: Vec<f64>,
    pub termination: String,
    pub steps: usize,
    pub solver_flags: usize,
    pub mean_min_gain: f64,
    pub mean_min_gain_normalized: f64,
    /// Last stationarity measure actually computed (`check_every` thinning
    /// skips some steps, so this is the latest non-thinned value).
    pub final_stationarity: f64,
    pub final_sigma_min: f64,
    pub wall_seconds: f64,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

/// One sweep child's result in the comparison summary.
#[derive(Debug, Serialize, Deserialize)]
pub struct SweepChildSummary {
    pub alpha: f64,
    /// Subdirectory holding the child's artifacts; absent in static mode.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dir: Option<String>,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub termination: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_losses: Option<Vec<f64>>,
    /// Mean over steps of the worst task gain `minᵢ gᵢᵀd` (single
    /// evaluation in static mode).
    pub mean_min_gain: f64,
    /// Same, rescaled by `‖d‖` (the fairness-trend quantity).
    pub mean_min_gain_normalized: f64,
}

/// The sweep-level comparison summary.
#[derive(Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub alphas: Vec<f64>,
    pub static_mode: bool,
    pub children: Vec<SweepChildSummary>,
    pub exit_code: i32,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    fs::write(path, text + "\n")
}
