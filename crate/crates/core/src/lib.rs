//! Counterfactual data augmentation for tabular binary classification.
//!
//! A base linear classifier scores every training row. Rows scored inside
//! the uncertainty band `[0.5 - alpha, 0.5 + alpha]` contribute a
//! counterfactual copy with the treatment flipped. That copy is labelled by
//! its nearest real neighbour in the opposite treatment group. The margin
//! `alpha` is chosen on a validation split.
//!
//! Modules, bottom up:
//! - [`tabular`]: schemas, CSV loading, encoding, splits, synthetic data
//! - [`classifier`]: logistic / hinge linear models trained by gradient descent
//! - [`counterfactual`]: treatment flipping and nearest-neighbour labelling
//! - [`trainer`]: margin grid search plus the two baselines
//! - [`metrics`]: accuracy and ROC AUC
//! - [`experiment`]: repeated-split harness and JSON reports

pub mod classifier;
pub mod counterfactual;
pub mod experiment;
pub mod metrics;
pub mod seed;
pub mod tabular;
pub mod trainer;

pub use classifier::{LinearModel, LossKind, Regularization, TrainConfig};
pub use counterfactual::{build_counterfactual_set, CounterfactualSet};
pub use tabular::{Dataset, FeatureSchema, Origin, RawTable};
pub use trainer::{run_ccral, run_counterfactual_all, run_standard, CcralTrace, MarginGrid};
