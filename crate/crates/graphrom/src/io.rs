//! Time-series ingestion from CSV or JSON, and CSV emission.
//!
//! Both formats hold one record per time sample with a time column plus named
//! numeric columns. JSON is an array of flat objects; column order follows the
//! first record.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use graphrom_core::preprocess::TimeSeries;
use graphrom_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Json,
}

const REJECTED: &[(&str, &str)] = &[
    ("pkl", "pickle"),
    ("pickle", "pickle"),
    ("h5", "HDF5"),
    ("hdf5", "HDF5"),
    ("mat", "MATLAB"),
    ("npy", "NumPy"),
    ("npz", "NumPy"),
];

/// Picks the format from the extension, rejecting known binary formats.
pub fn detect_format(path: &Path) -> AppResult<DataFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    if let Some((_, kind)) = REJECTED.iter().find(|(e, _)| *e == ext) {
        return Err(AppError::Data(format!(
            "{}: {kind} files are not supported; export to csv or json",
            path.display()
        )));
    }
    match ext.as_str() {
        "csv" | "txt" => Ok(DataFormat::Csv),
        "json" => Ok(DataFormat::Json),
        _ => Err(AppError::Data(format!(
            "{}: cannot infer format from extension `{ext}`; use csv or json",
            path.display()
        ))),
    }
}

/// Raw numeric table: header names and row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn column_index(&self, name: &str) -> AppResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::Data(format!("missing column `{name}` (found: {})", self.headers.join(", "))))
    }
}

pub fn read_table(path: &Path, format: DataFormat) -> AppResult<Table> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    match format {
        DataFormat::Csv => read_csv(file),
        DataFormat::Json => read_json(file),
    }
}

fn read_csv<R: std::io::Read>(reader: R) -> AppResult<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| AppError::Data(format!("bad csv header: {e}")))?
        .iter()
        .map(String::from)
        .collect();
    check_headers(&headers)?;
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        // Line 1 is the header.
        let line = k + 2;
        let rec = rec.map_err(|e| AppError::Data(format!("csv line {line}: {e}")))?;
        let row = rec
            .iter()
            .zip(&headers)
            .map(|(cell, name)| {
                cell.parse::<f64>().map_err(|_| {
                    AppError::Data(format!("non-numeric cell `{cell}` at line {line}, column `{name}`"))
                })
            })
            .collect::<AppResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

fn read_json<R: std::io::Read>(reader: R) -> AppResult<Table> {
    let records: Vec<serde_json::Map<String, serde_json::Value>> =
        serde_json::from_reader(reader).map_err(|e| AppError::Data(format!("json input must be an array of objects: {e}")))?;
    let Some(first) = records.first() else {
        return Ok(Table {
            headers: Vec::new(),
            rows: Vec::new(),
        });
    };
    let headers: Vec<String> = first.keys().cloned().collect();
    check_headers(&headers)?;
    let mut rows = Vec::with_capacity(records.len());
    for (k, rec) in records.iter().enumerate() {
        if rec.len() != headers.len() {
            return Err(AppError::Data(format!("json record {k} has {} fields, expected {}", rec.len(), headers.len())));
        }
        let row = headers
            .iter()
            .map(|name| {
                rec.get(name).and_then(serde_json::Value::as_f64).ok_or_else(|| {
                    AppError::Data(format!("record {k}, column `{name}`: missing or non-numeric value"))
                })
            })
            .collect::<AppResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

fn check_headers(headers: &[String]) -> AppResult<()> {
    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(AppError::Data(format!("duplicate column `{h}`")));
        }
    }
    Ok(())
}

/// Loads a series, requiring `time` and every name in `required`.
///
/// All other columns are kept in file order.
pub fn ingest(path: &Path, format: Option<DataFormat>, time: &str, required: &[String]) -> AppResult<TimeSeries> {
    let format = match format {
        Some(f) => f,
        None => detect_format(path)?,
    };
    table_to_series(read_table(path, format)?, time, required)
}

pub fn table_to_series(table: Table, time: &str, required: &[String]) -> AppResult<TimeSeries> {
    let ti = table.column_index(time)?;
    for r in required {
        table.column_index(r)?;
    }
    let t: Vec<f64> = table.rows.iter().map(|r| r[ti]).collect();
    let columns: Vec<(String, Vec<f64>)> = table
        .headers
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != ti)
        .map(|(c, name)| (name.clone(), table.rows.iter().map(|r| r[c]).collect()))
        .collect();
    TimeSeries::new(t, columns).map_err(|e| match e {
        // Data row k is file line k + 2.
        CoreError::NonMonotoneTime(k) => AppError::Data(format!(
            "time column `{time}` is not strictly increasing at data row {k} (line {})",
            k + 2
        )),
        other => AppError::Data(other.to_string()),
    })
}

/// Writes named columns as CSV. Values use the shortest round-trip decimal form.
pub fn write_csv(path: &Path, headers: &[&str], columns: &[&[f64]]) -> AppResult<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for r in 0..rows {
        let cells: Vec<String> = columns.iter().map(|c| fmt_f64(c[r])).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_series(path: &Path, series: &TimeSeries, time: &str) -> AppResult<()> {
    let mut headers = vec![time];
    let mut cols: Vec<&[f64]> = vec![series.t()];
    for (name, values) in series.columns() {
        headers.push(name);
        cols.push(values);
    }
    write_csv(path, &headers, &cols)
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| AppError::io(path, e))
}

/// Shortest representation that parses back to the same `f64`; non-finite values as `NaN`/`inf`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
