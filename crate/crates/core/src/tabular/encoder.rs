use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset, FeatureSchema, RawTable, TabularError};

/// Floor applied to fitted standard deviations.
pub const MIN_STDDEV: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordRange {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "lowercase")]
pub enum Encoding {
    /// `(v - mean) / stddev`.
    Standardized { mean: f64, stddev: f64 },
    /// 1.0 when the cell equals `one`, otherwise 0.0.
    Indicator { one: Option<String>, zero: Option<String> },
    /// One coordinate per level; unseen levels encode to all zeros.
    OneHot { levels: Vec<String> },
    /// The treatment: raw 0/1, never standardized.
    Treatment { one: String, zero: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    /// Position of the column in the raw table.
    pub source: usize,
    pub range: CoordRange,
    #[serde(flatten)]
    pub encoding: Encoding,
}

/// Feature encoding fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub header: Vec<String>,
    pub columns: Vec<EncodedColumn>,
    pub label_source: usize,
    pub positive_label: String,
    pub label_levels: Vec<String>,
    pub treatment_coord: usize,
    pub n_coords: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransformStats {
    /// Cells whose categorical or binary level was not seen during fitting.
    pub unseen_levels: usize,
}

fn observed_levels(raw: &RawTable, col: usize) -> BTreeSet<&str> {
    raw.rows.iter().map(|r| r[col].as_str()).collect()
}

impl Encoder {
    /// Fits continuous statistics and level maps on `raw` only.
    pub fn fit(raw: &RawTable, schema: &FeatureSchema) -> Result<Encoder, TabularError> {
        if raw.rows.is_empty() {
            return Err(TabularError::EmptyTable { dropped: raw.dropped_rows });
        }
        let header: Vec<String> = schema.column_names().map(str::to_owned).collect();
        if raw.header != header {
            return Err(TabularError::LayoutMismatch(format!(
                "table columns {:?} differ from schema columns {:?}",
                raw.header, header
            )));
        }

        let mut columns = Vec::new();
        let mut next = 0;
        let mut treatment_coord = None;
        for (source, spec) in schema.columns.iter().enumerate() {
            if spec.name == schema.label {
                continue;
            }
            let observed = observed_levels(raw, source);
            let (encoding, len) = if spec.name == schema.treatment {
                match observed.len() {
                    1 => return Err(TabularError::ConstantTreatment(spec.name.clone())),
                    2 => {}
                    count => return Err(TabularError::NotBinary { column: spec.name.clone(), count }),
                }
                if !observed.contains(schema.treatment_one.as_str()) {
                    return Err(TabularError::InvalidSchema(format!(
                        "treatment value `{}` never occurs in `{}`",
                        schema.treatment_one, spec.name
                    )));
                }
                let zero = observed
                    .iter()
                    .find(|v| **v != schema.treatment_one)
                    .expect("two levels")
                    .to_string();
                treatment_coord = Some(next);
                (Encoding::Treatment { one: schema.treatment_one.clone(), zero }, 1)
            } else {
                match spec.kind {
                    ColumnKind::Continuous => {
                        let values: Vec<f64> = raw
                            .rows
                            .iter()
                            .map(|r| r[source].parse::<f64>())
                            .collect::<Result<_, _>>()
                            .map_err(|e| {
                                TabularError::LayoutMismatch(format!("column `{}`: {e}", spec.name))
                            })?;
                        let n = values.len() as f64;
                        let mean = values.iter().sum::<f64>() / n;
                        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                        (Encoding::Standardized { mean, stddev: var.sqrt().max(MIN_STDDEV) }, 1)
                    }
                    ColumnKind::Binary => {
                        let levels: Vec<String> = match &spec.levels {
                            Some(l) => l.clone(),
                            None => {
                                if observed.len() > 2 {
                                    return Err(TabularError::NotBinary {
                                        column: spec.name.clone(),
                                        count: observed.len(),
                                    });
                                }
                                observed.iter().map(|s| s.to_string()).collect()
                            }
                        };
                        // With a single observed level the column is constant
                        // and encodes to zero.
                        let (zero, one) = match levels.as_slice() {
                            [z, o] => (Some(z.clone()), Some(o.clone())),
                            [z] => (Some(z.clone()), None),
                            _ => unreachable!("validated or observed binary column"),
                        };
                        (Encoding::Indicator { one, zero }, 1)
                    }
                    ColumnKind::Categorical => {
                        let levels: Vec<String> = match &spec.levels {
                            Some(l) => l.clone(),
                            None => observed.iter().map(|s| s.to_string()).collect(),
                        };
                        let len = levels.len();
                        (Encoding::OneHot { levels }, len)
                    }
                }
            };
            columns.push(EncodedColumn {
                name: spec.name.clone(),
                source,
                range: CoordRange { start: next, len },
                encoding,
            });
            next += len;
        }

        let label_source = schema.label_position();
        let mut label_levels: BTreeSet<&str> = observed_levels(raw, label_source);
        label_levels.insert(schema.positive_label.as_str());
        if label_levels.len() > 2 {
            return Err(TabularError::NotBinary {
                column: schema.label.clone(),
                count: label_levels.len(),
            });
        }

        Ok(Encoder {
            header,
            columns,
            label_source,
            positive_label: schema.positive_label.clone(),
            label_levels: label_levels.into_iter().map(str::to_owned).collect(),
            treatment_coord: treatment_coord.expect("validated schema has a treatment"),
            n_coords: next,
        })
    }

    pub fn transform(&self, raw: &RawTable) -> Result<Dataset, TabularError> {
        self.transform_with_stats(raw).map(|(ds, _)| ds)
    }

    pub fn transform_with_stats(&self, raw: &RawTable) -> Result<(Dataset, TransformStats), TabularError> {
        if raw.header != self.header {
            return Err(TabularError::LayoutMismatch(format!(
                "table columns {:?} differ from encoder columns {:?}",
                raw.header, self.header
            )));
        }
        let level_maps: Vec<Option<HashMap<&str, usize>>> = self
            .columns
            .iter()
            .map(|c| match &c.encoding {
                Encoding::OneHot { levels } => {
                    Some(levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect())
                }
                _ => None,
            })
            .collect();

        let mut stats = TransformStats::default();
        let mut x = vec![0.0; raw.n_rows() * self.n_coords];
        let mut y = Vec::with_capacity(raw.n_rows());
        for (row, out) in raw.rows.iter().zip(x.chunks_exact_mut(self.n_coords.max(1))) {
            for (col, map) in self.columns.iter().zip(&level_maps) {
                let cell = row[col.source].as_str();
                let start = col.range.start;
                match &col.encoding {
                    Encoding::Standardized { mean, stddev } => {
                        let v: f64 = cell.parse().map_err(|e| {
                            TabularError::LayoutMismatch(format!("column `{}`: {e}", col.name))
                        })?;
                        if !v.is_finite() {
                            return Err(TabularError::LayoutMismatch(format!(
                                "column `{}` holds non-finite {v}",
                                col.name
                            )));
                        }
                        out[start] = (v - mean) / stddev;
                    }
                    Encoding::Indicator { one, zero } => {
                        if one.as_deref() == Some(cell) {
                            out[start] = 1.0;
                        } else if zero.as_deref() != Some(cell) {
                            stats.unseen_levels += 1;
                        }
                    }
                    Encoding::OneHot { .. } => match map.as_ref().and_then(|m| m.get(cell)) {
                        Some(&k) => out[start + k] = 1.0,
                        None => stats.unseen_levels += 1,
                    },
                    Encoding::Treatment { one, zero } => {
                        if cell == one {
                            out[start] = 1.0;
                        } else if cell != zero {
                            return Err(TabularError::UnknownBinaryValue {
                                column: col.name.clone(),
                                value: cell.to_owned(),
                            });
                        }
                    }
                }
            }
            let label = row[self.label_source].as_str();
            if !self.label_levels.iter().any(|l| l == label) {
                return Err(TabularError::UnknownBinaryValue {
                    column: self.header[self.label_source].clone(),
                    value: label.to_owned(),
                });
            }
            y.push(u8::from(label == self.positive_label));
        }
        let ds = Dataset::new(x, self.n_coords, y, self.treatment_coord)?;
        Ok((ds, stats))
    }

    /// Human-readable name per encoded coordinate (`column` or `column=level`).
    pub fn coordinate_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_coords);
        for col in &self.columns {
            match &col.encoding {
                Encoding::OneHot { levels } => {
                    names.extend(levels.iter().map(|l| format!("{}={l}", col.name)))
                }
                _ => names.push(col.name.clone()),
            }
        }
        names
    }
}
