//! Numeric CSV tables: one header row, comma separated, every cell a number.

use std::fs::File;
use std::path::Path;

use hydragan_core::datapipe::Dataset;
use hydragan_core::numcore::Tensor;

use crate::error::{CliError, CliResult};

/// Header plus row-major values. `rows` is `None` for a header-only file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Option<Tensor>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(CliError::Data(format!("{}: missing or empty header", path.display())));
    }
    let mut data = Vec::new();
    let mut n = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Data(format!("{}: row {row}: {e}", path.display())))?;
        if record.len() != header.len() {
            return Err(CliError::Data(format!(
                "{}: row {row} has {} cells, header has {}",
                path.display(),
                record.len(),
                header.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: row {row}, column {} ('{}'): cannot parse {cell:?} as a number",
                    path.display(),
                    col + 1,
                    header[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "{}: row {row}, column {}: non-finite value",
                    path.display(),
                    col + 1
                )));
            }
            data.push(v);
        }
        n += 1;
    }
    let rows = if n == 0 {
        None
    } else {
        Some(Tensor::matrix(n, header.len(), data)?)
    };
    Ok(Table { header, rows })
}

/// Loads a raw (unnormalized) dataset, resolving the sensitive column by name.
pub fn load_csv(path: &Path, sensitive: &str) -> CliResult<Dataset> {
    let table = read_table(path)?;
    let rows = table
        .rows
        .ok_or_else(|| CliError::Data(format!("{}: no data rows", path.display())))?;
    Ok(Dataset::with_sensitive_name(table.header, rows, sensitive)?)
}

pub fn write_table(path: &Path, header: &[String], rows: Option<&Tensor>) -> CliResult<()> {
    let io = |e: csv::Error| CliError::output(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    if let Some(m) = rows {
        for i in 0..m.rows() {
            w.write_record(m.row(i).iter().map(|v| v.to_string())).map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::output(path, e))
}
