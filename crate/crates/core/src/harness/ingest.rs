//! Tabular ingestion: CSV + column schema -> [`Dataset`].
//!
//! The schema assigns every non-response column a role and a modality.
//! Categorical columns expand into one dummy indicator per non-reference
//! level; rows with any missing value are dropped and counted. Columns are
//! grouped by modality (ascending id) in the produced dataset.

use std::collections::BTreeMap;
use std::io::Read;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Continuous,
    Categorical,
    Binary,
}

/// Role, reference level (categorical only) and modality of one column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub role: ColumnRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub modality: usize,
}

/// Schema for [`ingest_table`].
///
/// JSON layout:
///
/// ```json
/// {
///   "response": "outcome",
///   "columns": {
///     "age":    {"role": "continuous",  "modality": 1},
///     "nodal":  {"role": "categorical", "reference": "N0", "modality": 1},
///     "er":     {"role": "binary",      "modality": 1},
///     "*":      {"role": "continuous",  "modality": 2}
///   }
/// }
/// ```
///
/// The `*` entry, when present, covers every column not named explicitly —
/// convenient for wide expression matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClinicalSchema {
    pub response: String,
    pub columns: BTreeMap<String, ColumnSpec>,
}

impl ClinicalSchema {
    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        let schema: ClinicalSchema = serde_json::from_reader(reader)?;
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        if self.response.is_empty() {
            return Err(Error::invalid("schema must name a response column"));
        }
        for (name, spec) in &self.columns {
            if spec.modality == 0 {
                return Err(Error::invalid(format!(
                    "column '{name}': modality ids start at 1"
                )));
            }
            match spec.role {
                ColumnRole::Categorical if spec.reference.is_none() => {
                    return Err(Error::invalid(format!(
                        "categorical column '{name}' needs a reference level"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn spec_for(&self, column: &str) -> Option<&ColumnSpec> {
        self.columns.get(column).or_else(|| self.columns.get("*"))
    }
}

/// Ingestion result: the dataset plus bookkeeping about dropped rows.
#[derive(Debug)]
pub struct IngestReport {
    pub dataset: Dataset,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// Reads a rectangular CSV with header and encodes it per the schema.
pub fn ingest_table<R: Read>(reader: R, schema: &ClinicalSchema) -> Result<IngestReport> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = csv_reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let response_idx = headers
        .iter()
        .position(|h| h == &schema.response)
        .ok_or_else(|| {
            Error::invalid(format!("response column '{}' not in header", schema.response))
        })?;
    for (idx, name) in headers.iter().enumerate() {
        if idx != response_idx && schema.spec_for(name).is_none() {
            return Err(Error::invalid(format!(
                "column '{name}' is not covered by the schema"
            )));
        }
    }

    // Listwise deletion: keep only complete rows.
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut rows_read = 0usize;
    for record in csv_reader.records() {
        let record = record?;
        rows_read += 1;
        if record.len() != headers.len() {
            return Err(Error::invalid(format!(
                "row {rows_read} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        if record.iter().any(is_missing) {
            continue;
        }
        rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }
    let rows_dropped = rows_read - rows.len();
    if rows.len() < 2 {
        return Err(Error::invalid(format!(
            "{} usable rows after dropping {rows_dropped} incomplete ones",
            rows.len()
        )));
    }

    let n = rows.len();
    let mut y = Array1::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let v: f64 = row[response_idx]
            .parse()
            .map_err(|_| Error::invalid(format!("response '{}' is not numeric", row[response_idx])))?;
        if v != 0.0 && v != 1.0 {
            return Err(Error::invalid(format!("response must be 0/1, found {v}")));
        }
        y[i] = v;
    }

    // Encode each column; categorical ones expand into dummies.
    struct Encoded {
        modality: usize,
        name: String,
        values: Vec<f64>,
    }
    let mut encoded: Vec<Encoded> = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        if idx == response_idx {
            continue;
        }
        let spec = schema.spec_for(name).expect("checked above");
        match spec.role {
            ColumnRole::Continuous => {
                let values = parse_numeric(&rows, idx, name)?;
                encoded.push(Encoded {
                    modality: spec.modality,
                    name: name.clone(),
                    values,
                });
            }
            ColumnRole::Binary => {
                let values = parse_numeric(&rows, idx, name)?;
                if values.iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::invalid(format!("binary column '{name}' has non-0/1 values")));
                }
                encoded.push(Encoded {
                    modality: spec.modality,
                    name: name.clone(),
                    values,
                });
            }
            ColumnRole::Categorical => {
                let reference = spec.reference.as_deref().expect("validated");
                let mut levels: Vec<String> = rows.iter().map(|r| r[idx].clone()).collect();
                levels.sort();
                levels.dedup();
                if !levels.iter().any(|l| l == reference) {
                    return Err(Error::invalid(format!(
                        "reference level '{reference}' of '{name}' not present in the data"
                    )));
                }
                for level in levels.iter().filter(|l| l.as_str() != reference) {
                    let values = rows
                        .iter()
                        .map(|r| (r[idx] == *level) as u8 as f64)
                        .collect();
                    encoded.push(Encoded {
                        modality: spec.modality,
                        name: format!("{name}={level}"),
                        values,
                    });
                }
            }
        }
    }

    // Group by modality id (ascending), preserving CSV order within each.
    let mut modality_ids: Vec<usize> = encoded.iter().map(|e| e.modality).collect();
    modality_ids.sort_unstable();
    modality_ids.dedup();
    let mut ordered: Vec<&Encoded> = Vec::with_capacity(encoded.len());
    let mut bounds = Vec::with_capacity(modality_ids.len());
    for &m in &modality_ids {
        let before = ordered.len();
        ordered.extend(encoded.iter().filter(|e| e.modality == m));
        bounds.push(ordered.len() - before);
    }

    let p = ordered.len();
    let mut x = Array2::zeros((n, p));
    let mut names = Vec::with_capacity(p);
    for (j, col) in ordered.iter().enumerate() {
        for i in 0..n {
            x[[i, j]] = col.values[i];
        }
        names.push(col.name.clone());
    }

    let dataset = Dataset::new(x, y, bounds)?.with_names(names)?;
    Ok(IngestReport {
        dataset,
        rows_read,
        rows_dropped,
    })
}

fn parse_numeric(rows: &[Vec<String>], idx: usize, name: &str) -> Result<Vec<f64>> {
    rows.iter()
        .map(|r| {
            r[idx]
                .parse()
                .map_err(|_| Error::invalid(format!("column '{name}': '{}' is not numeric", r[idx])))
        })
        .collect()
}
