//! Counterfactual rows: flip the treatment, then label the copy with the
//! nearest real row from the opposite treatment group.
//!
//! Candidates are restricted to real rows whose treatment equals the
//! flipped value. Without that restriction the source row itself is always
//! nearest and the counterfactual would simply copy its own label. Because
//! every candidate shares the counterfactual's treatment value, leaving the
//! treatment coordinate out of the distance changes nothing.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::tabular::{Dataset, Origin};

#[derive(Debug, Error, PartialEq)]
pub enum CounterfactualError {
    #[error("treatment coordinate holds {0}, expected 0 or 1")]
    NonBinaryTreatmentValue(f64),
    #[error("vectors have lengths {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("treatment coordinate {coord} is outside width {width}")]
    CoordinateOutOfRange { coord: usize, width: usize },
    #[error("no real training row has treatment {0}")]
    MatchingInfeasible(u8),
}

fn treatment_value(x: &[f64], coord: usize) -> Result<u8, CounterfactualError> {
    match x.get(coord) {
        None => Err(CounterfactualError::CoordinateOutOfRange { coord, width: x.len() }),
        Some(&0.0) => Ok(0),
        Some(&1.0) => Ok(1),
        Some(&v) => Err(CounterfactualError::NonBinaryTreatmentValue(v)),
    }
}

/// Copy of `x` with the 0/1 value at `treatment_coord` replaced by its complement.
pub fn flip_treatment(x: &[f64], treatment_coord: usize) -> Result<Vec<f64>, CounterfactualError> {
    let t = treatment_value(x, treatment_coord)?;
    let mut out = x.to_vec();
    out[treatment_coord] = f64::from(1 - t);
    Ok(out)
}

/// Squared Euclidean distance over every coordinate except `skip`.
#[inline]
fn masked_sq_distance(a: &[f64], b: &[f64], skip: usize) -> f64 {
    let mut acc = 0.0;
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        if k != skip {
            let diff = x - y;
            acc += diff * diff;
        }
    }
    acc
}

/// Euclidean distance over every coordinate except the treatment.
pub fn matching_distance(a: &[f64], b: &[f64], treatment_coord: usize) -> Result<f64, CounterfactualError> {
    if a.len() != b.len() {
        return Err(CounterfactualError::DimensionMismatch(a.len(), b.len()));
    }
    if treatment_coord >= a.len() {
        return Err(CounterfactualError::CoordinateOutOfRange { coord: treatment_coord, width: a.len() });
    }
    Ok(masked_sq_distance(a, b, treatment_coord).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Match {
    pub label: u8,
    pub index: usize,
    pub distance: f64,
}

/// Nearest real row of `train` whose treatment equals `cf`'s treatment.
///
/// Ties go to the smallest row index.
pub fn match_label(cf: &[f64], train: &Dataset) -> Result<Match, CounterfactualError> {
    if cf.len() != train.n_cols() {
        return Err(CounterfactualError::DimensionMismatch(cf.len(), train.n_cols()));
    }
    let coord = train.treatment_coord();
    let t = treatment_value(cf, coord)?;
    let mut best: Option<(f64, usize)> = None;
    for (i, row) in train.rows().enumerate() {
        if train.origins()[i] != Origin::Real || train.treatments()[i] != t {
            continue;
        }
        let d = masked_sq_distance(cf, row, coord);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    let (sq, index) = best.ok_or(CounterfactualError::MatchingInfeasible(t))?;
    Ok(Match { label: train.labels()[index], index, distance: sq.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualEntry {
    /// Row of the training set this counterfactual was made from.
    pub source_index: usize,
    pub cf_x: Vec<f64>,
    pub cf_label: u8,
    pub matched_index: usize,
    pub match_distance: f64,
}

/// One counterfactual per real training row, in row order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualSet {
    pub treatment_coord: usize,
    pub entries: Vec<CounterfactualEntry>,
}

/// Rows of one treatment group packed contiguously without the treatment coordinate.
struct PackedGroup {
    indices: Vec<usize>,
    data: Vec<f64>,
    width: usize,
}

impl PackedGroup {
    fn new(train: &Dataset, treatment: u8) -> Self {
        let coord = train.treatment_coord();
        let width = train.n_cols() - 1;
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for (i, row) in train.rows().enumerate() {
            if train.origins()[i] == Origin::Real && train.treatments()[i] == treatment {
                indices.push(i);
                data.extend_from_slice(&row[..coord]);
                data.extend_from_slice(&row[coord + 1..]);
            }
        }
        PackedGroup { indices, data, width }
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.width..(k + 1) * self.width]
    }
}

#[inline]
fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

const SOURCE_BLOCK: usize = 32;
const CANDIDATE_BLOCK: usize = 256;

/// Nearest candidate per query, scanning candidates in blocks so that one
/// block stays cache-resident while a block of queries is matched against it.
/// Candidates are visited in ascending index order with a strict `<`, so the
/// smallest index wins ties regardless of blocking.
fn nearest_in_group(queries: &PackedGroup, candidates: &PackedGroup) -> Vec<(f64, usize)> {
    let n_q = queries.indices.len();
    let mut best = vec![(f64::INFINITY, usize::MAX); n_q];
    best.par_chunks_mut(SOURCE_BLOCK).enumerate().for_each(|(block, out)| {
        let q0 = block * SOURCE_BLOCK;
        for c0 in (0..candidates.indices.len()).step_by(CANDIDATE_BLOCK) {
            let c1 = (c0 + CANDIDATE_BLOCK).min(candidates.indices.len());
            for (off, slot) in out.iter_mut().enumerate() {
                let q = queries.row(q0 + off);
                for c in c0..c1 {
                    let d = sq_distance(q, candidates.row(c));
                    if d < slot.0 {
                        *slot = (d, c);
                    }
                }
            }
        }
    });
    best
}

/// Builds the counterfactual of every real row of `train`.
///
/// Counterfactual rows already present in `train` are neither sources nor
/// candidates. The result does not depend on thread scheduling.
pub fn build_counterfactual_set(train: &Dataset) -> Result<CounterfactualSet, CounterfactualError> {
    let coord = train.treatment_coord();
    let groups = [PackedGroup::new(train, 0), PackedGroup::new(train, 1)];
    for (t, g) in groups.iter().enumerate() {
        if g.indices.is_empty() {
            return Err(CounterfactualError::MatchingInfeasible(t as u8));
        }
    }

    let mut slots: Vec<Option<CounterfactualEntry>> = vec![None; train.n_rows()];
    for source_t in 0..2usize {
        let (sources, candidates) = (&groups[source_t], &groups[1 - source_t]);
        let nearest = nearest_in_group(sources, candidates);
        for (k, (sq, c)) in nearest.into_iter().enumerate() {
            let source_index = sources.indices[k];
            let matched_index = candidates.indices[c];
            let mut cf_x = train.row(source_index).to_vec();
            cf_x[coord] = (1 - source_t) as f64;
            slots[source_index] = Some(CounterfactualEntry {
                source_index,
                cf_x,
                cf_label: train.labels()[matched_index],
                matched_index,
                match_distance: sq.sqrt(),
            });
        }
    }
    Ok(CounterfactualSet { treatment_coord: coord, entries: slots.into_iter().flatten().collect() })
}

impl CounterfactualSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `train` followed by the counterfactuals of the rows in `sources`
    /// (training-row indices), in the order given.
    pub fn augment(&self, train: &Dataset, sources: &[usize]) -> Dataset {
        let mut out = train.clone();
        for &i in sources {
            let entry = self
                .entries
                .binary_search_by_key(&i, |e| e.source_index)
                .map(|k| &self.entries[k])
                .expect("counterfactual exists for every real training row");
            out.push_counterfactual(&entry.cf_x, entry.cf_label);
        }
        out
    }

    /// Audit dump: `source_index,matched_index,distance,cf_label`.
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source_index", "matched_index", "distance", "cf_label"])?;
        for e in &self.entries {
            w.write_record([
                e.source_index.to_string(),
                e.matched_index.to_string(),
                e.match_distance.to_string(),
                e.cf_label.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
