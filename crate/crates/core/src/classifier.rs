//! Linear probabilistic classifiers trained by full-batch gradient descent.
//!
//! Both loss kinds score a row as `sigmoid(w·x + b)`. For the logistic loss
//! that is the fitted probability; for the hinge loss it is a monotone
//! squashing of the margin, which is all the uncertainty band needs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabular::Dataset;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("training set holds a single label class")]
    SingleClassTraining,
    #[error("loss became non-finite at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("malformed model document: {0}")]
    MalformedModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logistic,
    Hinge,
}

/// Strength of the L2 penalty on the weights.
///
/// `SvmC(c)` follows the C-parameterised SVM objective: dividing
/// `C·Σ loss + ½‖w‖²` by `C·N` gives an average loss with
/// `lambda = 1 / (C·N)`, where `N` is the size of the set being fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    L2Lambda(f64),
    SvmC(f64),
}

impl Regularization {
    pub fn lambda(&self, n_rows: usize) -> f64 {
        match *self {
            Regularization::L2Lambda(lambda) => lambda,
            Regularization::SvmC(c) => 1.0 / (c * n_rows as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub regularization: Regularization,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Training stops once an accepted step improves the loss by less than this.
    pub tol: f64,
    /// Carried for replay; full-batch descent from zero draws no randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss_kind: LossKind::Logistic,
            regularization: Regularization::SvmC(1.0),
            learning_rate: 0.1,
            max_epochs: 500,
            tol: 1e-7,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: String| Err(ClassifierError::InvalidConfig(m));
        match self.regularization {
            Regularization::L2Lambda(l) if !(l >= 0.0 && l.is_finite()) => {
                return bad(format!("l2 lambda {l} must be finite and >= 0"))
            }
            Regularization::SvmC(c) if !(c > 0.0 && c.is_finite()) => {
                return bad(format!("C {c} must be finite and > 0"))
            }
            _ => {}
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be > 0", self.learning_rate));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance {} must be > 0", self.tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub loss_kind: LossKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(default)]
    pub trained_on: usize,
}

/// Result of [`train_with_history`].
#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub model: LinearModel,
    /// Loss after each accepted step, starting at the zero model.
    pub losses: Vec<f64>,
    /// Step size in force when training stopped.
    pub final_learning_rate: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearModel {
    pub fn zeros(loss_kind: LossKind, n_features: usize) -> Self {
        LinearModel { loss_kind, weights: vec![0.0; n_features], bias: 0.0, trained_on: 0 }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn check_width(&self, got: usize) -> Result<(), ClassifierError> {
        if got != self.weights.len() {
            return Err(ClassifierError::DimensionMismatch { expected: self.weights.len(), got });
        }
        Ok(())
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64, ClassifierError> {
        self.check_width(x.len())?;
        Ok(dot(&self.weights, x) + self.bias)
    }

    /// Score in `[0, 1]`, strictly increasing in `w·x + b`.
    pub fn predict_score(&self, x: &[f64]) -> Result<f64, ClassifierError> {
        self.decision(x).map(sigmoid)
    }

    /// 1 iff the score is at least 0.5.
    pub fn predict_label(&self, x: &[f64]) -> Result<u8, ClassifierError> {
        self.predict_score(x).map(label_from_score)
    }

    pub fn scores(&self, ds: &Dataset) -> Result<Vec<f64>, ClassifierError> {
        self.check_width(ds.n_cols())?;
        Ok(ds.rows().map(|r| sigmoid(dot(&self.weights, r) + self.bias)).collect())
    }

    pub fn predict_labels(&self, ds: &Dataset) -> Result<Vec<u8>, ClassifierError> {
        Ok(self.scores(ds)?.into_iter().map(label_from_score).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let m: LinearModel =
            serde_json::from_str(text).map_err(|e| ClassifierError::MalformedModel(e.to_string()))?;
        if m.weights.iter().any(|w| !w.is_finite()) || !m.bias.is_finite() {
            return Err(ClassifierError::MalformedModel("non-finite parameter".into()));
        }
        Ok(m)
    }
}

pub fn label_from_score(score: f64) -> u8 {
    u8::from(score >= 0.5)
}

/// Average loss over `ds` plus `(lambda/2)·‖w‖²`, with its gradient.
///
/// The gradient has `d + 1` entries: weights first, bias last. The bias is
/// not penalised. For the hinge loss the subgradient at margin exactly 1 is 0.
pub fn loss_and_gradient(
    model: &LinearModel,
    ds: &Dataset,
    l2_lambda: f64,
) -> Result<(f64, Vec<f64>), ClassifierError> {
    if ds.is_empty() {
        return Err(ClassifierError::EmptyTraining);
    }
    model.check_width(ds.n_cols())?;
    let d = ds.n_cols();
    let mut grad = vec![0.0; d + 1];
    let mut total = 0.0;
    for (row, &y) in ds.rows().zip(ds.labels()) {
        let z = dot(&model.weights, row) + model.bias;
        let coef = match model.loss_kind {
            LossKind::Logistic => {
                let yf = f64::from(y);
                total += softplus(z) - yf * z;
                sigmoid(z) - yf
            }
            LossKind::Hinge => {
                let s = if y == 1 { 1.0 } else { -1.0 };
                let margin = s * z;
                if margin < 1.0 {
                    total += 1.0 - margin;
                    -s
                } else {
                    0.0
                }
            }
        };
        if coef != 0.0 {
            for (g, v) in grad[..d].iter_mut().zip(row) {
                *g += coef * v;
            }
            grad[d] += coef;
        }
    }
    let n = ds.n_rows() as f64;
    for g in grad.iter_mut() {
        *g /= n;
    }
    for (g, w) in grad[..d].iter_mut().zip(&model.weights) {
        *g += l2_lambda * w;
    }
    let penalty = 0.5 * l2_lambda * dot(&model.weights, &model.weights);
    Ok((total / n + penalty, grad))
}

/// Step sizes below this end training.
const MIN_LEARNING_RATE: f64 = 1e-12;

pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<LinearModel, ClassifierError> {
    train_with_history(ds, cfg).map(|t| t.model)
}

/// Full-batch gradient descent from the zero model.
///
/// A step that would raise the loss (or make it non-finite) is rejected and
/// the learning rate halved, so `losses` never increases.
pub fn train_with_history(ds: &Dataset, cfg: &TrainConfig) -> Result<Training, ClassifierError> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(ClassifierError::EmptyTraining);
    }
    let positives = ds.count_label(1);
    if positives == 0 || positives == ds.n_rows() {
        return Err(ClassifierError::SingleClassTraining);
    }
    let lambda = cfg.regularization.lambda(ds.n_rows());
    let d = ds.n_cols();

    let mut model = LinearModel::zeros(cfg.loss_kind, d);
    model.trained_on = ds.n_rows();
    let (mut loss, mut grad) = loss_and_gradient(&model, ds, lambda)?;
    if !loss.is_finite() {
        return Err(ClassifierError::DivergedLoss { epoch: 0 });
    }
    let mut losses = vec![loss];
    let mut lr = cfg.learning_rate;
    let mut candidate = model.clone();

    for epoch in 1..=cfg.max_epochs {
        for (c, (w, g)) in candidate.weights.iter_mut().zip(model.weights.iter().zip(&grad)) {
            *c = w - lr * g;
        }
        candidate.bias = model.bias - lr * grad[d];
        let (next_loss, next_grad) = loss_and_gradient(&candidate, ds, lambda)?;
        if !(next_loss <= loss) {
            lr *= 0.5;
            if lr < MIN_LEARNING_RATE {
                if !next_loss.is_finite() {
                    return Err(ClassifierError::DivergedLoss { epoch });
                }
                break;
            }
            continue;
        }
        let improvement = loss - next_loss;
        std::mem::swap(&mut model, &mut candidate);
        loss = next_loss;
        grad = next_grad;
        losses.push(loss);
        if improvement < cfg.tol {
            break;
        }
    }
    Ok(Training { model, losses, final_learning_rate: lr })
}
