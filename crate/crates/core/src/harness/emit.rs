//! Result emission: score rows as CSV, per-cell five-number summaries as
//! JSON (boxplot-ready).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ScoreRow;

/// Writes rows with a fixed header and column order.
pub fn write_rows_csv<W: Write>(writer: W, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows back; the inverse of [`write_rows_csv`].
pub fn read_rows_csv<R: Read>(reader: R) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in r.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Five-number summary (min, lower quartile, median, upper quartile, max).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    fn from_values(values: &mut Vec<f64>) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        FiveNumber {
            min: values[0],
            q1: quantile(values, 0.25),
            median: quantile(values, 0.5),
            q3: quantile(values, 0.75),
            max: values[values.len() - 1],
        }
    }
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

/// Boxplot-ready distribution summary for one benchmark cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub design: String,
    pub setting: String,
    pub procedure: String,
    pub replicates: usize,
    pub tpp: FiveNumber,
    pub fp: FiveNumber,
}

/// Groups rows by (design, setting, procedure) and summarizes the power and
/// false-positive distributions of each cell.
pub fn summarize(rows: &[ScoreRow]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(String, String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in rows {
        let key = (
            row.design.clone(),
            row.setting.clone(),
            row.procedure.clone(),
        );
        let entry = cells.entry(key).or_default();
        entry.0.push(row.tpp);
        entry.1.push(row.fp as f64);
    }
    cells
        .into_iter()
        .map(|((design, setting, procedure), (mut tpps, mut fps))| CellSummary {
            design,
            setting,
            procedure,
            replicates: tpps.len(),
            tpp: FiveNumber::from_values(&mut tpps),
            fp: FiveNumber::from_values(&mut fps),
        })
        .collect()
}

/// Writes the per-cell summary as pretty JSON.
pub fn write_summary_json<W: Write>(mut writer: W, rows: &[ScoreRow]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::invalid("no rows to summarize"));
    }
    let cells = summarize(rows);
    serde_json::to_writer_pretty(&mut writer, &cells)?;
    writer.write_all(b"\n")?;
    Ok(())
}
