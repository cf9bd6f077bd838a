use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentError, Method};
use crate::trainer::CcralTrace;

/// Tolerance for re-derived aggregates.
pub const AGGREGATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation (divides by the number of repeats).
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }

    fn matches(&self, other: &Summary) -> bool {
        let close = |a: f64, b: f64| (a.is_nan() && b.is_nan()) || (a - b).abs() <= AGGREGATE_TOLERANCE;
        close(self.mean, other.mean) && close(self.std, other.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo { name: "ccral".into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Usable rows after dropping incomplete ones.
    pub n_rows: usize,
    pub dropped_rows: usize,
    /// Raw feature columns, treatment included, label excluded.
    pub n_features: usize,
    pub treatment: String,
    pub treatment_one: String,
    pub label: String,
    pub positive_label: String,
    pub n_treated: usize,
    pub n_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub repeat: usize,
    pub seed: u64,
    /// Width of the encoded feature matrix for this repeat's encoder.
    pub n_encoded: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub test_accuracy: f64,
    pub test_auc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<CcralTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub runs: Vec<RunResult>,
    pub accuracy: Summary,
    pub auc: Summary,
}

impl MethodReport {
    pub fn from_runs(method: Method, runs: Vec<RunResult>) -> Self {
        let acc: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
        let auc: Vec<f64> = runs.iter().map(|r| r.test_auc).collect();
        MethodReport { method, accuracy: Summary::of(&acc), auc: Summary::of(&auc), runs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatFailure {
    pub repeat: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool: ToolInfo,
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    pub methods: Vec<MethodReport>,
    #[serde(default)]
    pub failures: Vec<RepeatFailure>,
}

impl ExperimentReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::MalformedReport(e.to_string()))
    }

    /// Re-derives every aggregate from the per-repeat lists.
    pub fn verify_aggregates(&self) -> Result<(), ExperimentError> {
        for m in &self.methods {
            let fresh = MethodReport::from_runs(m.method, m.runs.clone());
            if !fresh.accuracy.matches(&m.accuracy) || !fresh.auc.matches(&m.auc) {
                return Err(ExperimentError::MalformedReport(format!(
                    "stored aggregates for {} do not match its runs",
                    m.method
                )));
            }
        }
        Ok(())
    }
}

/// Text table of per-method mean and standard deviation.
///
/// Values are printed in shortest round-trip form, so the stored aggregates
/// can be read back exactly.
pub fn render_report(report: &ExperimentReport) -> Result<String, ExperimentError> {
    report.verify_aggregates()?;
    let mut out = String::new();
    let d = &report.dataset;
    let name = d.name.as_deref().unwrap_or("dataset");
    let _ = writeln!(
        out,
        "{name}: N={} M={} T={} (T=1: {}) y={} (y=1: {})",
        d.n_rows, d.n_features, d.treatment, d.treatment_one, d.label, d.positive_label
    );
    let _ = writeln!(
        out,
        "repeats={} K={} seed={} classifier={:?}",
        report.config.repeats, report.config.k, report.config.master_seed, report.config.classifier.loss_kind
    );
    let _ = writeln!(
        out,
        "{:<16}{:>5}  {:<44}{:<44}selected alpha",
        "method", "runs", "accuracy (mean ± std)", "auc (mean ± std)"
    );
    for method in Method::ALL {
        let Some(m) = report.method(method) else { continue };
        let alphas: Vec<String> = m
            .runs
            .iter()
            .filter_map(|r| r.selected_alpha)
            .map(|a| a.to_string())
            .collect();
        let _ = writeln!(
            out,
            "{:<16}{:>5}  {:<44}{:<44}{}",
            method.to_string(),
            m.runs.len(),
            format!("{} ± {}", m.accuracy.mean, m.accuracy.std),
            format!("{} ± {}", m.auc.mean, m.auc.std),
            if alphas.is_empty() { "-".to_string() } else { alphas.join(",") }
        );
    }
    for f in &report.failures {
        let _ = writeln!(out, "repeat {} (seed {}) failed: {}", f.repeat, f.seed, f.error);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_has_zero_std() {
        let s = Summary::of(&[0.7]);
        assert_eq!((s.mean, s.std), (0.7, 0.0));
    }

    #[test]
    fn population_std() {
        let s = Summary::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }
}
