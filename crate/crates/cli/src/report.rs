//! Run reports and CSV helpers.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct CurveSummary {
    pub learner: String,
    pub seed: u64,
    pub csv: String,
    pub episodes: usize,
    pub plateau: Option<usize>,
    pub final_avg_pos_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdaptSummary {
    pub scenario: String,
    pub combo: String,
    pub seed: u64,
    pub csv: String,
    pub trials: usize,
    pub zero_shot_cost: f64,
    pub best_cost: f64,
    pub final_cost: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageSummary {
    pub learner: String,
    pub seed: u64,
    pub split: String,
    pub csv: String,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TimingSummary {
    pub model: String,
    pub csv: String,
    pub calls: usize,
    pub median_us: f64,
    pub p95_us: f64,
    /// Median latency of the first benchmarked model divided by this one's.
    pub speedup_vs_first: f64,
}

/// Everything a command produced. Every number here is recomputable from
/// the CSV named next to it.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: String,
    pub curves: Vec<CurveSummary>,
    pub adaptations: Vec<AdaptSummary>,
    pub coverage: Vec<CoverageSummary>,
    pub timing: Vec<TimingSummary>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, config: String) -> Self {
        Self { command: command.to_string(), config, ..Self::default() }
    }

    pub fn merge(&mut self, other: RunReport) {
        self.curves.extend(other.curves);
        self.adaptations.extend(other.adaptations);
        self.coverage.extend(other.coverage);
        self.timing.extend(other.timing);
        self.artifacts.extend(other.artifacts);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("report.toml");
        let text = toml::to_string(self).map_err(|e| CliError::Run(e.to_string()))?;
        write_file(&path, &text)?;
        Ok(path)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Artifact(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))
}

/// Name of `path` relative to `base` when possible, for report entries.
pub fn rel(base: &Path, path: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}

/// Linear-interpolated percentile of a sample, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Rows of a headed CSV as string fields, after checking the header.
pub fn csv_rows(text: &str, header: &str) -> Result<Vec<Vec<String>>, CliError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(header) {
        return Err(CliError::Artifact(format!("expected CSV header `{header}`")));
    }
    Ok(lines.filter(|l| !l.trim().is_empty()).map(|l| l.split(',').map(|f| f.trim().to_string()).collect()).collect())
}
