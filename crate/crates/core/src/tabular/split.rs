use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, TabularError};
use crate::seed;

/// Train/validation/test fractions plus the seed for the shuffle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
    pub stratify: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_frac: 0.6, val_frac: 0.2, test_frac: 0.2, seed: 0, stratify: true }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), TabularError> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(TabularError::InfeasibleSplit(format!(
                "fractions {fracs:?} must each lie in (0, 1)"
            )));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(TabularError::InfeasibleSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Row indices of each part, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-group share of `floor(frac * total)` rows.
///
/// Each group gets `floor(frac * size)`; the few rows still missing go to
/// the groups with the largest fractional remainders (lowest group first on
/// ties).
fn allocate(frac: f64, sizes: &[usize]) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = (frac * total as f64).floor() as usize;
    let exact: Vec<f64> = sizes.iter().map(|&n| frac * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    let assigned: usize = counts.iter().sum();
    for &g in order.iter().take(target.saturating_sub(assigned)) {
        counts[g] += 1;
    }
    counts
}

/// Partitions rows by label (when stratified) into train/val/test.
///
/// Validation and test receive `floor(frac * N)` rows each, spread over the
/// label groups in proportion; training receives the remainder.
pub fn split_indices(labels: &[u8], spec: &SplitSpec) -> Result<SplitIndices, TabularError> {
    spec.validate()?;
    let mut rng = seed::rng_for(spec.seed, seed::purpose::SPLIT, 0);
    let groups: Vec<Vec<usize>> = if spec.stratify {
        (0..=1u8)
            .map(|label| (0..labels.len()).filter(|&i| labels[i] == label).collect())
            .collect()
    } else {
        vec![(0..labels.len()).collect()]
    };

    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let val_counts = allocate(spec.val_frac, &sizes);
    let test_counts = allocate(spec.test_frac, &sizes);

    let mut parts = SplitIndices { train: vec![], val: vec![], test: vec![] };
    for (g, mut group) in groups.into_iter().enumerate() {
        group.shuffle(&mut rng);
        let (n, n_val, n_test) = (group.len(), val_counts[g], test_counts[g]);
        if n_val + n_test > n || (spec.stratify && (n_val == 0 || n_test == 0 || n_val + n_test == n)) {
            return Err(TabularError::InfeasibleSplit(format!(
                "a label group of {n} rows cannot populate every part"
            )));
        }
        parts.val.extend_from_slice(&group[..n_val]);
        parts.test.extend_from_slice(&group[n_val..n_val + n_test]);
        parts.train.extend_from_slice(&group[n_val + n_test..]);
    }
    if parts.train.is_empty() || parts.val.is_empty() || parts.test.is_empty() {
        return Err(TabularError::InfeasibleSplit(format!(
            "{} rows leave a part empty",
            labels.len()
        )));
    }
    parts.train.sort_unstable();
    parts.val.sort_unstable();
    parts.test.sort_unstable();
    Ok(parts)
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset), TabularError> {
    let parts = split_indices(ds.labels(), spec)?;
    Ok((ds.select(&parts.train), ds.select(&parts.val), ds.select(&parts.test)))
}
