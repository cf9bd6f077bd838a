use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TabularError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Categorical,
}

/// One column of a tabular file.
///
/// `levels` is optional for categorical and binary columns. When present it
/// freezes the encoding order; otherwise levels are taken from the training
/// rows in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

/// Declares column kinds plus which columns are the treatment and the label.
///
/// `columns` lists every column used from the file, including the treatment
/// and the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub columns: Vec<ColumnSpec>,
    pub treatment: String,
    pub treatment_one: String,
    pub label: String,
    pub positive_label: String,
}

impl FeatureSchema {
    pub fn from_json(text: &str) -> Result<Self, TabularError> {
        let schema: FeatureSchema =
            serde_json::from_str(text).map_err(|e| TabularError::InvalidSchema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, TabularError> {
        let text = fs::read_to_string(path).map_err(|source| TabularError::FileUnreadable {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<(), TabularError> {
        let invalid = |msg: String| Err(TabularError::InvalidSchema(msg));

        let mut seen = HashSet::new();
        for col in &self.columns {
            if col.name.is_empty() {
                return invalid("empty column name".into());
            }
            if !seen.insert(col.name.as_str()) {
                return invalid(format!("column `{}` listed twice", col.name));
            }
            if let Some(levels) = &col.levels {
                if levels.is_empty() {
                    return invalid(format!("column `{}` declares no levels", col.name));
                }
                let unique: HashSet<_> = levels.iter().collect();
                if unique.len() != levels.len() {
                    return invalid(format!("column `{}` has duplicate levels", col.name));
                }
                if levels.iter().any(|l| l.is_empty()) {
                    return invalid(format!("column `{}` has an empty level", col.name));
                }
                match col.kind {
                    ColumnKind::Binary if levels.len() != 2 => {
                        return invalid(format!("binary column `{}` needs exactly 2 levels", col.name))
                    }
                    ColumnKind::Continuous => {
                        return invalid(format!("continuous column `{}` cannot declare levels", col.name))
                    }
                    _ => {}
                }
            }
        }

        if self.treatment == self.label {
            return invalid("treatment and label must be different columns".into());
        }
        for (role, name, value) in [
            ("treatment", &self.treatment, &self.treatment_one),
            ("label", &self.label, &self.positive_label),
        ] {
            let Some(col) = self.column(name) else {
                return invalid(format!("{role} column `{name}` is not listed in columns"));
            };
            if col.kind != ColumnKind::Binary {
                return invalid(format!("{role} column `{name}` must have kind binary"));
            }
            if let Some(levels) = &col.levels {
                if !levels.contains(value) {
                    return invalid(format!("{role} value `{value}` is not a level of `{name}`"));
                }
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Columns that end up in the feature matrix (everything except the label).
    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(move |c| c.name != self.label)
    }

    /// Number of features before encoding, treatment included.
    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn label_position(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.name == self.label)
            .expect("validated schema lists its label")
    }
}
