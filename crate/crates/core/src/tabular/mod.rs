//! Tabular input: schemas, CSV loading, encoding, splitting and a synthetic
//! generator with a planted treatment interaction.

mod encoder;
mod schema;
mod split;
mod synth;

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encoder::{CoordRange, EncodedColumn, Encoder, Encoding, TransformStats, MIN_STDDEV};
pub use schema::{ColumnKind, ColumnSpec, FeatureSchema};
pub use split::{split, split_indices, SplitIndices, SplitSpec};
pub use synth::{generate_synthetic, synthetic_schema, SyntheticDraw, SyntheticParams, SYNTH_LABEL, SYNTH_TREATMENT};

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("cannot read `{path}`: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write `{path}`: {source}")]
    FileUnwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("header is missing columns: {}", .0.join(", "))]
    HeaderMismatch(Vec<String>),
    #[error("no usable rows ({dropped} dropped)")]
    EmptyTable { dropped: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("treatment column `{0}` has a single distinct value")]
    ConstantTreatment(String),
    #[error("column `{column}` is declared binary but has {count} distinct values")]
    NotBinary { column: String, count: usize },
    #[error("value `{value}` of `{column}` is neither of its two fitted levels")]
    UnknownBinaryValue { column: String, value: String },
    #[error("table layout does not match the encoder: {0}")]
    LayoutMismatch(String),
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Where a row of a [`Dataset`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Real,
    Counterfactual,
}

/// Text cells in schema column order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Rows skipped at load time because a cell was missing or unparseable.
    pub dropped_rows: usize,
}

impl RawTable {
    pub fn new(header: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == header.len()));
        RawTable { header, rows, dropped_rows: 0 }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> RawTable {
        RawTable {
            header: self.header.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            dropped_rows: 0,
        }
    }

    /// Binary label per row: 1 iff the label cell equals `schema.positive_label`.
    pub fn labels(&self, schema: &FeatureSchema) -> Result<Vec<u8>, TabularError> {
        let col = self
            .column_index(&schema.label)
            .ok_or_else(|| TabularError::HeaderMismatch(vec![schema.label.clone()]))?;
        Ok(self
            .rows
            .iter()
            .map(|r| u8::from(r[col] == schema.positive_label))
            .collect())
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), TabularError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| TabularError::Csv(e.to_string());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| TabularError::Csv(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), TabularError> {
        let file = File::create(path).map_err(|source| TabularError::FileUnwritable {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(file)
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "na" | "NaN" | "nan" | "null")
}

/// Reads a CSV file and keeps the schema's columns, in schema order.
///
/// Extra columns in the file are ignored. Rows with a missing cell, a
/// non-numeric continuous cell or the wrong number of fields are dropped and
/// counted in [`RawTable::dropped_rows`].
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<RawTable, TabularError> {
    let file = File::open(path).map_err(|source| TabularError::FileUnreadable {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema)
}

pub fn read_csv(input: impl std::io::Read, schema: &FeatureSchema) -> Result<RawTable, TabularError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let file_header: Vec<String> = reader
        .headers()
        .map_err(|e| TabularError::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();

    let mut positions = Vec::with_capacity(schema.columns.len());
    let mut missing = Vec::new();
    for name in schema.column_names() {
        match file_header.iter().position(|h| h == name) {
            Some(p) => positions.push(p),
            None => missing.push(name.to_owned()),
        }
    }
    if !missing.is_empty() {
        return Err(TabularError::HeaderMismatch(missing));
    }

    let mut rows = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record.map_err(|e| TabularError::Csv(e.to_string()))?;
        if record.len() != file_header.len() {
            dropped += 1;
            continue;
        }
        let row: Vec<String> = positions.iter().map(|&p| record[p].to_owned()).collect();
        let usable = row.iter().zip(&schema.columns).all(|(cell, col)| {
            !is_missing(cell)
                && (col.kind != ColumnKind::Continuous
                    || cell.parse::<f64>().is_ok_and(f64::is_finite))
        });
        if usable {
            rows.push(row);
        } else {
            dropped += 1;
        }
    }
    if rows.is_empty() {
        return Err(TabularError::EmptyTable { dropped });
    }
    Ok(RawTable {
        header: schema.column_names().map(str::to_owned).collect(),
        rows,
        dropped_rows: dropped,
    })
}

/// Encoded rows ready for training.
///
/// `x` is row-major with `n_cols` entries per row. The treatment coordinate
/// holds a raw 0/1 value and always agrees with `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    n_cols: usize,
    y: Vec<u8>,
    t: Vec<u8>,
    origin: Vec<Origin>,
    treatment_coord: usize,
}

impl Dataset {
    /// Builds a dataset of real rows; `t` is read from the treatment coordinate.
    pub fn new(
        x: Vec<f64>,
        n_cols: usize,
        y: Vec<u8>,
        treatment_coord: usize,
    ) -> Result<Self, TabularError> {
        let bad = |m: String| Err(TabularError::InvalidArgument(m));
        if n_cols == 0 || treatment_coord >= n_cols {
            return bad(format!("treatment coordinate {treatment_coord} outside width {n_cols}"));
        }
        if x.len() != y.len() * n_cols {
            return bad(format!("{} values for {} rows of width {n_cols}", x.len(), y.len()));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return bad(format!("non-finite feature value {v}"));
        }
        if y.iter().any(|&v| v > 1) {
            return bad("labels must be 0 or 1".into());
        }
        let mut t = Vec::with_capacity(y.len());
        for row in x.chunks_exact(n_cols) {
            match row[treatment_coord] {
                0.0 => t.push(0),
                1.0 => t.push(1),
                v => return bad(format!("treatment coordinate holds {v}, expected 0 or 1")),
            }
        }
        let origin = vec![Origin::Real; y.len()];
        Ok(Dataset { x, n_cols, y, t, origin, treatment_coord })
    }

    /// Convenience constructor from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<u8>, treatment_coord: usize) -> Result<Self, TabularError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(TabularError::InvalidArgument("ragged rows".into()));
        }
        Self::new(rows.concat(), n_cols, y, treatment_coord)
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.x.chunks_exact(self.n_cols)
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    pub fn treatments(&self) -> &[u8] {
        &self.t
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origin
    }

    pub fn treatment_coord(&self) -> usize {
        self.treatment_coord
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.y.iter().filter(|&&v| v == label).count()
    }

    pub fn count_origin(&self, origin: Origin) -> usize {
        self.origin.iter().filter(|&&o| o == origin).count()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            x.extend_from_slice(self.row(i));
        }
        Dataset {
            x,
            n_cols: self.n_cols,
            y: indices.iter().map(|&i| self.y[i]).collect(),
            t: indices.iter().map(|&i| self.t[i]).collect(),
            origin: indices.iter().map(|&i| self.origin[i]).collect(),
            treatment_coord: self.treatment_coord,
        }
    }

    /// Appends one counterfactual row. The caller guarantees the treatment
    /// coordinate holds 0 or 1.
    pub(crate) fn push_counterfactual(&mut self, row: &[f64], label: u8) {
        debug_assert_eq!(row.len(), self.n_cols);
        let t = row[self.treatment_coord];
        debug_assert!(t == 0.0 || t == 1.0);
        self.x.extend_from_slice(row);
        self.y.push(label);
        self.t.push(u8::from(t == 1.0));
        self.origin.push(Origin::Counterfactual);
    }
}
