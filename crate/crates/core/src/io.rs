//! Plain-text dense matrix format.
//!
//! First line `rows cols`, then `rows` lines of space-separated decimals.
//! Vectors are single-column matrices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{LigmeError, Result};

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| LigmeError::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| LigmeError::Parse(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(LigmeError::Parse(format!(
            "header must be `rows cols`, got {header:?}"
        )));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for line in lines {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| LigmeError::Parse(format!("row {}: {e}", seen_rows + 1)))?;
        if vals.len() != cols {
            return Err(LigmeError::Parse(format!(
                "row {} has {} entries, expected {cols}",
                seen_rows + 1,
                vals.len()
            )));
        }
        data.extend(vals);
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(LigmeError::Parse(format!(
            "expected {rows} rows, found {seen_rows}"
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix(m))?;
    Ok(())
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(LigmeError::Parse(format!(
            "expected a single-column vector, got {} columns",
            m.ncols()
        )));
    }
    Ok(m.column(0).into_owned())
}

pub fn write_vector(path: impl AsRef<Path>, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}
