//! Plain CSV matrix files.
//!
//! One row per line, comma-separated decimal reals. An optional first
//! line of the form `# rows cols` states the shape; without it the shape
//! is inferred from the line and field counts. Values are written with
//! 17 significant digits so a save/load round trip is bitwise exact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Read a matrix from a CSV file.
pub fn load_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_csv(&text)
}

/// Parse CSV text into a matrix. Line numbers in errors are 1-based.
pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut declared: Option<(usize, usize)> = None;
    let mut width: Option<usize> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if rows.is_empty() && declared.is_none() {
                declared = parse_shape_comment(line);
            }
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let field = field.trim();
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("cannot parse '{field}' as a real number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("non-finite value '{field}'"),
                });
            }
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {w} fields, found {}", row.len()),
                });
            }
            _ => {}
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    if let Some((r, c)) = declared {
        if r != rows.len() || c != rows[0].len() {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "header declares {r}x{c} but file holds {}x{}",
                    rows.len(),
                    rows[0].len()
                ),
            });
        }
    }
    DenseMatrix::from_rows(&rows)
}

fn parse_shape_comment(line: &str) -> Option<(usize, usize)> {
    let parts: Vec<&str> = line.trim_start_matches('#').split_whitespace().collect();
    if parts.len() == 2 {
        if let (Ok(r), Ok(c)) = (parts[0].parse(), parts[1].parse()) {
            return Some((r, c));
        }
    }
    None
}

/// Write a matrix as CSV with a shape header.
pub fn save_csv(mtx: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), to_csv(mtx))?;
    Ok(())
}

pub fn to_csv(mtx: &DenseMatrix) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {} {}\n", mtx.rows(), mtx.cols()));
    for i in 0..mtx.rows() {
        let fields: Vec<String> = mtx.row(i).iter().map(|v| format_real(*v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// 17 significant digits; enough for an exact f64 round trip.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}
