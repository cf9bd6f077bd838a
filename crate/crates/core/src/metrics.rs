//! Accuracy and ROC AUC.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("inputs have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("AUC needs both label classes")]
    SingleClassInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub auc: f64,
    pub n: usize,
}

fn check_lengths<A, B>(a: &[A], b: &[B]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

/// Fraction of positions where the prediction equals the truth.
pub fn accuracy(y_true: &[u8], y_pred: &[u8]) -> Result<f64, MetricsError> {
    check_lengths(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// Mann-Whitney AUC via midranks, `O(n log n)`.
///
/// Tied scores share the average of their ranks, which counts a tied
/// positive/negative pair as one half.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(y_true, scores)?;
    let n_pos = y_true.iter().filter(|&&y| y == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClassInput);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of (1-based) midranks of the positives, kept doubled so that the
    // arithmetic stays in integers.
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j share the midrank (i + 1 + j) / 2
        let doubled_midrank = (i + 1 + j) as u128;
        let positives = order[i..j].iter().filter(|&&k| y_true[k] == 1).count() as u128;
        doubled_rank_sum += doubled_midrank * positives;
        i = j;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    // U = R - p(p+1)/2; doubled to stay integral.
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2 * p * q) as f64)
}

pub fn evaluate(y_true: &[u8], scores: &[f64]) -> Result<EvalResult, MetricsError> {
    let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
    Ok(EvalResult {
        accuracy: accuracy(y_true, &predicted)?,
        auc: roc_auc(y_true, scores)?,
        n: y_true.len(),
    })
}

/// `O(n²)` pair count used to cross-check [`roc_auc`].
pub fn roc_auc_pairwise(y_true: &[u8], scores: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(y_true, scores)?;
    let mut wins = 0u64; // doubled: 2 per win, 1 per tie
    let mut pairs = 0u64;
    for (i, &yi) in y_true.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in y_true.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 2;
            } else if scores[i] == scores[j] {
                wins += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(MetricsError::SingleClassInput);
    }
    Ok(wins as f64 / (2 * pairs) as f64)
}
