//! Plain-text matrices: one row per line, whitespace-separated decimals.
//! Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use netstress_core::Matrix;

use crate::error::{AppError, Result};

/// Parses matrix text; `origin` names the source in error messages.
pub fn parse_matrix(text: &str, origin: &Path) -> Result<Matrix> {
    let parse_err = |reason: String| AppError::Parse {
        path: origin.to_path_buf(),
        reason,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| parse_err(format!("line {}: `{tok}` is not a number", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(format!(
                    "line {}: {} entries, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err("no matrix rows".into()));
    }
    if rows.len() != rows[0].len() {
        return Err(parse_err(format!(
            "matrix is {}x{}, expected a square matrix",
            rows.len(),
            rows[0].len()
        )));
    }
    Matrix::from_rows(&rows).map_err(|e| parse_err(e.to_string()))
}

/// Reads a matrix file.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|source| AppError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text, path)
}

/// Matrix text with shortest round-trip decimal formatting.
pub fn format_matrix(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Writes a matrix file.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, format_matrix(m)).map_err(|source| AppError::Io {
        path: path.to_path_buf(),
        source,
    })
}
