//! Reading spaces and interval unions, writing JSON results and CSV series.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ghlab::intervals::IntervalUnion;
use ghlab::metric::MetricError;
use ghlab::FiniteMetricSpace;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Metric { path: PathBuf, source: MetricError },
    #[error("{path}: header says n = {n} but the matrix has {rows} rows")]
    SizeMismatch { path: PathBuf, n: usize, rows: usize },
}

#[derive(Deserialize)]
struct RawSpace {
    n: usize,
    d: Vec<Vec<f64>>,
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn parse_error(path: &Path, message: impl ToString) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Reads a distance matrix from JSON (`{"n", "d"}`) or, for `.csv` files, one
/// row per line, and validates it with tolerance `tol`.
pub fn read_space(path: &Path, tol: f64) -> Result<FiniteMetricSpace, IoError> {
    let rows = if is_csv(path) {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| parse_error(path, e))?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| parse_error(path, e))?;
            let row = record
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| parse_error(path, format!("{f:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        rows
    } else {
        let raw: RawSpace = read_json(path)?;
        if raw.n != raw.d.len() {
            return Err(IoError::SizeMismatch {
                path: path.to_path_buf(),
                n: raw.n,
                rows: raw.d.len(),
            });
        }
        raw.d
    };
    FiniteMetricSpace::validate(&rows, tol).map_err(|source| IoError::Metric {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e))
}

pub fn read_intervals(path: &Path) -> Result<IntervalUnion, IoError> {
    read_json(path)
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), IoError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|source| IoError::Write {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|source| IoError::Write {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

/// Pretty JSON to `path`, or to standard output.
pub fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("results serialize");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// A space as JSON, or as a CSV matrix when `path` ends in `.csv`.
pub fn write_space(space: &FiniteMetricSpace, path: Option<&Path>) -> Result<(), IoError> {
    match path {
        Some(p) if is_csv(p) => {
            let rows: Vec<Vec<String>> = space
                .to_matrix()
                .iter()
                .map(|row| row.iter().map(f64::to_string).collect())
                .collect();
            write_csv(p, None, &rows)
        }
        _ => write_json(space, path),
    }
}

/// Writes rows of already formatted fields, with an optional header.
pub fn write_csv(path: &Path, header: Option<&[&str]>, rows: &[Vec<String>]) -> Result<(), IoError> {
    let wrap = |e: csv::Error| IoError::Write {
        path: path.to_path_buf(),
        source: io::Error::other(e),
    };
    let mut w = csv::WriterBuilder::new().from_path(path).map_err(wrap)?;
    if let Some(h) = header {
        w.write_record(h).map_err(wrap)?;
    }
    for row in rows {
        w.write_record(row).map_err(wrap)?;
    }
    w.flush().map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}
