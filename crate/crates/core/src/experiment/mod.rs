//! Repeated-split experiment harness.
//!
//! Each repeat derives its own seed from the master seed, splits the raw
//! table, fits an encoder on the training part only, and runs every
//! requested method on the same three parts. Methods are scored on the
//! held-out test part.

mod report;

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{
    render_report, DatasetInfo, ExperimentReport, MethodReport, RepeatFailure, RunResult, Summary, ToolInfo,
    AGGREGATE_TOLERANCE,
};

use crate::classifier::{ClassifierError, TrainConfig};
use crate::metrics;
use crate::seed;
use crate::tabular::{load_csv, split_indices, Encoder, FeatureSchema, RawTable, SplitSpec, TabularError};
use crate::trainer::{run_ccral, run_counterfactual_all, run_standard, MarginGrid, TrainerError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] TabularError),
    #[error(transparent)]
    Training(#[from] TrainerError),
    #[error("cannot write `{path}`: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed report: {0}")]
    MalformedReport(String),
}

impl From<ClassifierError> for ExperimentError {
    fn from(e: ClassifierError) -> Self {
        ExperimentError::Training(e.into())
    }
}

impl From<metrics::MetricsError> for ExperimentError {
    fn from(e: metrics::MetricsError) -> Self {
        ExperimentError::Training(e.into())
    }
}

impl ExperimentError {
    /// Process exit code: 1 usage, 2 data, 3 training.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::InvalidConfig(_) => 1,
            ExperimentError::Data(_) | ExperimentError::Write { .. } | ExperimentError::MalformedReport(_) => 2,
            ExperimentError::Training(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Standard,
    Counterfactual,
    Ccral,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Standard, Method::Counterfactual, Method::Ccral];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Standard => "standard",
            Method::Counterfactual => "counterfactual",
            Method::Ccral => "ccral",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(Method::Standard),
            "counterfactual" => Ok(Method::Counterfactual),
            "ccral" => Ok(Method::Ccral),
            other => Err(ExperimentError::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.6, val: 0.2, test: 0.2 }
    }
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_k() -> usize {
    10
}
fn default_repeats() -> usize {
    5
}
fn default_true() -> bool {
    true
}

/// Resolved experiment settings. Every field except the two paths has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data_path: PathBuf,
    pub schema_path: PathBuf,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub split: SplitFractions,
    #[serde(default = "default_true")]
    pub stratify: bool,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub classifier: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(data_path: impl Into<PathBuf>, schema_path: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            data_path: data_path.into(),
            schema_path: schema_path.into(),
            methods: default_methods(),
            k: default_k(),
            repeats: default_repeats(),
            split: SplitFractions::default(),
            stratify: true,
            master_seed: 0,
            classifier: TrainConfig::default(),
            output_path: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        let invalid = |e: &dyn std::fmt::Display| ExperimentError::InvalidConfig(e.to_string());
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods requested".into());
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return bad("a method is listed twice".into());
        }
        self.split_spec(0).validate().map_err(|e| invalid(&e))?;
        MarginGrid::evenly_spaced(self.k).map_err(|e| invalid(&e))?;
        self.classifier.validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train_frac: self.split.train,
            val_frac: self.split.val,
            test_frac: self.split.test,
            seed,
            stratify: self.stratify,
        }
    }

    /// Seed of repeat `r`: `derive_seed(master_seed, purpose::REPEAT, r)`.
    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        seed::derive_seed(self.master_seed, seed::purpose::REPEAT, repeat as u64)
    }
}

/// Loads the schema and data named by `cfg` and runs every repeat.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let schema = FeatureSchema::load(&cfg.schema_path)?;
    let raw = load_csv(&cfg.data_path, &schema)?;
    run_experiment_on(&raw, &schema, cfg)
}

/// Runs every repeat on an already-loaded table.
///
/// A repeat that fails is recorded in [`ExperimentReport::failures`] and the
/// remaining repeats still run.
pub fn run_experiment_on(
    raw: &RawTable,
    schema: &FeatureSchema,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    schema.validate()?;
    let labels = raw.labels(schema)?;
    let treat_col = raw
        .column_index(&schema.treatment)
        .ok_or_else(|| TabularError::HeaderMismatch(vec![schema.treatment.clone()]))?;
    let dataset = DatasetInfo {
        name: schema.name.clone(),
        n_rows: raw.n_rows(),
        dropped_rows: raw.dropped_rows,
        n_features: schema.n_features(),
        treatment: schema.treatment.clone(),
        treatment_one: schema.treatment_one.clone(),
        label: schema.label.clone(),
        positive_label: schema.positive_label.clone(),
        n_treated: raw.rows.iter().filter(|r| r[treat_col] == schema.treatment_one).count(),
        n_positive: labels.iter().filter(|&&y| y == 1).count(),
    };
    let grid = MarginGrid::evenly_spaced(cfg.k)?;

    let outcomes: Vec<Result<Vec<(Method, RunResult)>, RepeatFailure>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|repeat| {
            let seed = cfg.repeat_seed(repeat);
            run_repeat(raw, schema, &labels, cfg, &grid, repeat, seed)
                .map_err(|e| RepeatFailure { repeat, seed, error: e.to_string() })
        })
        .collect();

    let mut per_method: Vec<(Method, Vec<RunResult>)> =
        cfg.methods.iter().map(|&m| (m, Vec::new())).collect();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(results) => {
                for (method, run) in results {
                    let slot = per_method.iter_mut().find(|(m, _)| *m == method).expect("requested");
                    slot.1.push(run);
                }
            }
            Err(f) => failures.push(f),
        }
    }

    Ok(ExperimentReport {
        tool: ToolInfo::current(),
        config: cfg.clone(),
        dataset,
        methods: per_method.into_iter().map(|(m, runs)| MethodReport::from_runs(m, runs)).collect(),
        failures,
    })
}

fn run_repeat(
    raw: &RawTable,
    schema: &FeatureSchema,
    labels: &[u8],
    cfg: &ExperimentConfig,
    grid: &MarginGrid,
    repeat: usize,
    seed: u64,
) -> Result<Vec<(Method, RunResult)>, ExperimentError> {
    let parts = split_indices(labels, &cfg.split_spec(seed))?;
    let train_raw = raw.select(&parts.train);
    let encoder = Encoder::fit(&train_raw, schema)?;
    let train = encoder.transform(&train_raw)?;
    let val = encoder.transform(&raw.select(&parts.val))?;
    let test = encoder.transform(&raw.select(&parts.test))?;

    let mut results = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let (model, trace) = match method {
            Method::Standard => (run_standard(&train, &cfg.classifier)?, None),
            Method::Counterfactual => (run_counterfactual_all(&train, &cfg.classifier)?, None),
            Method::Ccral => {
                let (m, t) = run_ccral(&train, &val, &cfg.classifier, grid)?;
                (m, Some(t))
            }
        };
        let eval = metrics::evaluate(test.labels(), &model.scores(&test)?)?;
        results.push((
            method,
            RunResult {
                repeat,
                seed,
                n_encoded: train.n_cols(),
                n_train: train.n_rows(),
                n_val: val.n_rows(),
                n_test: test.n_rows(),
                test_accuracy: eval.accuracy,
                test_auc: eval.auc,
                selected_alpha: trace.as_ref().map(|t| t.selected_alpha),
                trace,
            },
        ));
    }
    Ok(results)
}

/// Writes the report as pretty JSON with a trailing newline.
pub fn write_report(report: &ExperimentReport, path: &Path) -> Result<(), ExperimentError> {
    std::fs::write(path, report.to_json()).map_err(|source| ExperimentError::Write {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<ExperimentReport, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::MalformedReport(format!(
        "cannot read `{}`: {e}",
        path.display()
    )))?;
    ExperimentReport::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{generate_synthetic, synthetic_schema};

    fn cfg(methods: Vec<Method>, repeats: usize) -> ExperimentConfig {
        ExperimentConfig { methods, repeats, k: 4, ..ExperimentConfig::new("mem.csv", "mem.json") }
    }

    #[test]
    fn single_repeat_has_one_entry_and_zero_std() {
        let raw = generate_synthetic(300, 3, 2.0, 0.1, 1).unwrap();
        let report = run_experiment_on(&raw, &synthetic_schema(3), &cfg(vec![Method::Standard], 1)).unwrap();
        assert_eq!(report.methods.len(), 1);
        assert_eq!(report.methods[0].runs.len(), 1);
        assert_eq!(report.methods[0].accuracy.std, 0.0);
        assert!(report.failures.is_empty());
    }

    #[test]
    fn report_is_deterministic_and_selected_alpha_is_on_grid() {
        let raw = generate_synthetic(300, 3, 2.0, 0.1, 2).unwrap();
        let c = cfg(Method::ALL.to_vec(), 3);
        let a = run_experiment_on(&raw, &synthetic_schema(3), &c).unwrap();
        let b = run_experiment_on(&raw, &synthetic_schema(3), &c).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let grid = MarginGrid::evenly_spaced(c.k).unwrap();
        for run in &a.method(Method::Ccral).unwrap().runs {
            assert!(grid.contains(run.selected_alpha.unwrap()));
        }
        a.verify_aggregates().unwrap();
        let back = ExperimentReport::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn methods_share_partitions() {
        let raw = generate_synthetic(300, 3, 2.0, 0.1, 3).unwrap();
        let report = run_experiment_on(&raw, &synthetic_schema(3), &cfg(Method::ALL.to_vec(), 2)).unwrap();
        for r in 0..2 {
            let sizes: Vec<_> = report
                .methods
                .iter()
                .map(|m| (m.runs[r].seed, m.runs[r].n_train, m.runs[r].n_val, m.runs[r].n_test))
                .collect();
            assert!(sizes.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn failing_repeats_are_recorded() {
        // 12 rows with two positives cannot be stratified into three parts.
        let mut raw = generate_synthetic(12, 2, 0.0, 0.0, 4).unwrap();
        for (i, row) in raw.rows.iter_mut().enumerate() {
            row[3] = if i < 2 { "1" } else { "0" }.into();
        }
        let report = run_experiment_on(&raw, &synthetic_schema(2), &cfg(vec![Method::Standard], 2)).unwrap();
        assert_eq!(report.failures.len(), 2);
        assert!(report.methods[0].runs.is_empty());
        assert!(report.failures[0].error.contains("infeasible split"));
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = ExperimentConfig::from_json(r#"{"data_path": "d.csv", "schema_path": "s.json"}"#).unwrap();
        assert_eq!(c.k, 10);
        assert_eq!(c.repeats, 5);
        assert_eq!(c.methods, Method::ALL.to_vec());
        assert_eq!(c.split, SplitFractions::default());
        c.validate().unwrap();
        for broken in [
            ExperimentConfig { repeats: 0, ..c.clone() },
            ExperimentConfig { methods: vec![], ..c.clone() },
            ExperimentConfig { methods: vec![Method::Ccral, Method::Ccral], ..c.clone() },
            ExperimentConfig { k: 0, ..c.clone() },
            ExperimentConfig { split: SplitFractions { train: 0.5, val: 0.5, test: 0.5 }, ..c.clone() },
        ] {
            assert_eq!(broken.validate().unwrap_err().exit_code(), 1);
        }
    }

    #[test]
    fn repeat_seeds_follow_the_mixing_rule() {
        let c = ExperimentConfig { master_seed: 99, ..ExperimentConfig::new("a", "b") };
        assert_eq!(c.repeat_seed(3), seed::derive_seed(99, seed::purpose::REPEAT, 3));
        assert_ne!(c.repeat_seed(0), c.repeat_seed(1));
    }

    #[test]
    fn render_lists_requested_methods_only() {
        let raw = generate_synthetic(300, 3, 2.0, 0.1, 5).unwrap();
        let report =
            run_experiment_on(&raw, &synthetic_schema(3), &cfg(vec![Method::Standard, Method::Counterfactual], 2))
                .unwrap();
        let text = render_report(&report).unwrap();
        assert!(text.contains("standard"));
        assert!(text.contains("counterfactual"));
        assert!(!text.lines().any(|l| l.starts_with("ccral")));

        let mut tampered = report.clone();
        tampered.methods[0].accuracy.mean += 1e-6;
        assert!(matches!(render_report(&tampered), Err(ExperimentError::MalformedReport(_))));
    }
}
