//! Margin search: augment the training set with counterfactuals of the rows
//! the base model is unsure about, for each margin on a grid, and keep the
//! model with the best validation accuracy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{self, ClassifierError, LinearModel, TrainConfig};
use crate::counterfactual::{build_counterfactual_set, CounterfactualError, CounterfactualSet};
use crate::metrics::{self, MetricsError};
use crate::tabular::{Dataset, Origin};

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("margin {0} is outside [0, 0.5]")]
    AlphaOutOfRange(f64),
    #[error("invalid margin grid: {0}")]
    InvalidGrid(String),
    #[error("validation set is empty")]
    EmptyValidation,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Counterfactual(#[from] CounterfactualError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn check_alpha(alpha: f64) -> Result<(), TrainerError> {
    if (0.0..=0.5).contains(&alpha) {
        Ok(())
    } else {
        Err(TrainerError::AlphaOutOfRange(alpha))
    }
}

/// Indices whose score lies in `[0.5 - alpha, 0.5 + alpha]`, bounds inclusive.
pub fn uncertain_indices(scores: &[f64], alpha: f64) -> Result<Vec<usize>, TrainerError> {
    check_alpha(alpha)?;
    let (lo, hi) = (0.5 - alpha, 0.5 + alpha);
    Ok(scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| lo <= s && s <= hi)
        .map(|(i, _)| i)
        .collect())
}

/// Strictly increasing margins within `[0, 0.5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MarginGrid {
    alphas: Vec<f64>,
}

impl MarginGrid {
    pub fn new(alphas: Vec<f64>) -> Result<Self, TrainerError> {
        if alphas.is_empty() {
            return Err(TrainerError::InvalidGrid("no margins".into()));
        }
        for &a in &alphas {
            check_alpha(a)?;
        }
        if alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TrainerError::InvalidGrid(format!("{alphas:?} is not strictly increasing")));
        }
        Ok(MarginGrid { alphas })
    }

    /// `[0, 0.5/k, 2·0.5/k, ..., 0.5]`: `k` evenly spaced margins plus zero.
    ///
    /// Zero makes the unaugmented model one of the candidates and 0.5 makes
    /// the fully augmented one another.
    pub fn evenly_spaced(k: usize) -> Result<Self, TrainerError> {
        if k == 0 {
            return Err(TrainerError::InvalidGrid("K must be at least 1".into()));
        }
        let mut alphas = vec![0.0];
        alphas.extend((1..=k).map(|i| 0.5 * i as f64 / k as f64));
        Self::new(alphas)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn contains(&self, alpha: f64) -> bool {
        self.alphas.contains(&alpha)
    }
}

impl TryFrom<Vec<f64>> for MarginGrid {
    type Error = TrainerError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        MarginGrid::new(v)
    }
}

impl From<MarginGrid> for Vec<f64> {
    fn from(g: MarginGrid) -> Self {
        g.alphas
    }
}

pub fn make_margin_grid(k: usize) -> Result<MarginGrid, TrainerError> {
    MarginGrid::evenly_spaced(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub alpha: f64,
    pub n_uncertain: usize,
    pub n_train_augmented: usize,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcralTrace {
    pub points: Vec<TracePoint>,
    pub selected_k: usize,
    pub selected_alpha: f64,
}

impl CcralTrace {
    pub fn selected(&self) -> &TracePoint {
        &self.points[self.selected_k]
    }

    pub fn best_val_accuracy(&self) -> f64 {
        self.points.iter().map(|p| p.val_accuracy).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

pub fn run_standard(train: &Dataset, cfg: &TrainConfig) -> Result<LinearModel, TrainerError> {
    Ok(classifier::train(train, cfg)?)
}

/// Trains on the real rows plus the counterfactual of every real row.
pub fn run_counterfactual_all(train: &Dataset, cfg: &TrainConfig) -> Result<LinearModel, TrainerError> {
    let set = build_counterfactual_set(train)?;
    let all: Vec<usize> = real_rows(train).collect();
    Ok(classifier::train(&set.augment(train, &all), cfg)?)
}

fn real_rows(ds: &Dataset) -> impl Iterator<Item = usize> + '_ {
    ds.origins().iter().enumerate().filter(|(_, o)| **o == Origin::Real).map(|(i, _)| i)
}

pub fn validation_accuracy(model: &LinearModel, val: &Dataset) -> Result<f64, TrainerError> {
    Ok(metrics::accuracy(val.labels(), &model.predict_labels(val)?)?)
}

/// Everything the grid loop needs, computed once before it.
pub struct Prepared<'a> {
    train: &'a Dataset,
    counterfactuals: CounterfactualSet,
    /// Base-model score of each real training row, indexed like `real`.
    scores: Vec<f64>,
    real: Vec<usize>,
}

impl<'a> Prepared<'a> {
    pub fn new(train: &'a Dataset, cfg: &TrainConfig) -> Result<Self, TrainerError> {
        let base = classifier::train(train, cfg)?;
        let counterfactuals = build_counterfactual_set(train)?;
        let real: Vec<usize> = real_rows(train).collect();
        let all_scores = base.scores(train)?;
        let scores = real.iter().map(|&i| all_scores[i]).collect();
        Ok(Prepared { train, counterfactuals, scores, real })
    }

    pub fn counterfactuals(&self) -> &CounterfactualSet {
        &self.counterfactuals
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Training set for margin `alpha`.
    pub fn augmented(&self, alpha: f64) -> Result<(Dataset, usize), TrainerError> {
        let picked: Vec<usize> =
            uncertain_indices(&self.scores, alpha)?.into_iter().map(|k| self.real[k]).collect();
        Ok((self.counterfactuals.augment(self.train, &picked), picked.len()))
    }
}

/// Grid search over margins; returns the validation-best model.
///
/// The base model, its scores and the counterfactual set are computed once.
/// Every grid point retrains from zero with the same `cfg`. Ties in
/// validation accuracy go to the smallest margin. Grid points run in
/// parallel, but the trace is assembled in grid order.
pub fn run_ccral(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    grid: &MarginGrid,
) -> Result<(LinearModel, CcralTrace), TrainerError> {
    if val.is_empty() {
        return Err(TrainerError::EmptyValidation);
    }
    let prepared = Prepared::new(train, cfg)?;
    let fitted: Vec<(LinearModel, TracePoint)> = grid
        .alphas()
        .par_iter()
        .map(|&alpha| {
            let (augmented, n_uncertain) = prepared.augmented(alpha)?;
            let model = classifier::train(&augmented, cfg)?;
            let val_accuracy = validation_accuracy(&model, val)?;
            let point = TracePoint { alpha, n_uncertain, n_train_augmented: augmented.n_rows(), val_accuracy };
            Ok((model, point))
        })
        .collect::<Result<_, TrainerError>>()?;

    let mut selected_k = 0;
    for (k, (_, p)) in fitted.iter().enumerate() {
        if p.val_accuracy > fitted[selected_k].1.val_accuracy {
            selected_k = k;
        }
    }
    let (models, points): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let model = models.into_iter().nth(selected_k).expect("grid is non-empty");
    let trace = CcralTrace { selected_alpha: points[selected_k].alpha, points, selected_k };
    Ok((model, trace))
}
