//! CSV ingestion and output writing.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndis_core::{Matrix, RegressionData};

use crate::error::{CliError, Result};

/// Reads a comma-separated numeric matrix. A first row with any non-numeric
/// field is taken as a header and skipped.
pub fn load_csv(path: &Path) -> Result<Matrix> {
    let file = File::open(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(file, &path.display().to_string())
}

/// [`load_csv`] over any reader; `name` labels errors.
pub fn parse_csv<R: Read>(reader: R, name: &str) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| CliError::Parse {
            row: line,
            col: 1,
            msg: e.to_string(),
        })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let parsed: Vec<Result<f64, String>> = rec
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(format!("non-finite value {f:?}")),
                Err(_) => Err(format!("not a number: {f:?}")),
            })
            .collect();
        if line == 1 && parsed.iter().any(|p| p.is_err()) {
            // header row
            width = Some(rec.len());
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (j, p) in parsed.into_iter().enumerate() {
            row.push(p.map_err(|msg| CliError::Parse {
                row: line,
                col: j + 1,
                msg,
            })?);
        }
        match width {
            Some(w) if w != row.len() => {
                return Err(CliError::Parse {
                    row: line,
                    col: row.len().min(w) + 1,
                    msg: format!("expected {w} fields, found {}", row.len()),
                })
            }
            _ => width = Some(row.len()),
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::EmptyInput(name.to_string()));
    }
    log::info!("{name}: {} rows x {} columns", rows.len(), rows[0].len());
    Ok(Matrix::from_rows(&rows)?)
}

/// Loads `[B, b]` with the last column as the response.
pub fn load_regression(path: &Path) -> Result<RegressionData> {
    Ok(RegressionData::from_data(&load_csv(path)?)?)
}

/// Writes to `path`, or to standard output when absent.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

/// Rows as CSV text, one record per line.
pub fn csv_rows<S: AsRef<str>>(header: Option<&[S]>, rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h.iter().map(|s| s.as_ref())).expect("in-memory write");
    }
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// Shortest round-tripping decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
