//! Dense matrix exchange formats.
//!
//! CSV: one row per line, entries separated by commas, no header.
//! JSON: `{"rows": n, "cols": d, "data": [row-major entries]}`.
//!
//! Numbers are written in scientific notation with 17 significant digits,
//! which round-trips every finite `f64` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Formats `v` with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse(format!(
                    "row {} has {} entries, expected {c}",
                    rows + 1,
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("invalid number `{field}` in row {}", rows + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse("empty matrix".into()))?;
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn to_json(m: &DMatrix<f64>) -> String {
    let mut out = format!("{{\"rows\": {}, \"cols\": {}, \"data\": [", m.nrows(), m.ncols());
    let mut first = true;
    for row in m.row_iter() {
        for &v in row.iter() {
            if !first {
                out.push_str(", ");
            }
            first = false;
            let _ = write!(out, "{}", format_f64(v));
        }
    }
    out.push_str("]}");
    out
}

#[derive(Debug, Deserialize)]
pub(crate) struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixJson {
    pub(crate) fn into_matrix(self) -> Result<DMatrix<f64>> {
        if self.rows.checked_mul(self.cols) != Some(self.data.len()) {
            return Err(Error::Parse(format!(
                "expected {} x {} = {} entries, found {}",
                self.rows,
                self.cols,
                self.rows.saturating_mul(self.cols),
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

pub fn from_json(text: &str) -> Result<DMatrix<f64>> {
    let parsed: MatrixJson = serde_json::from_str(text)?;
    parsed.into_matrix()
}

/// Reads a matrix, choosing the format from the file extension (`.json` or CSV otherwise).
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    if is_json(path) {
        from_json(&text)
    } else {
        from_csv(&text)
    }
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let text = if is_json(path) { to_json(m) } else { to_csv(m) };
    fs::write(path, text)?;
    Ok(())
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -2.0, 0.1]);
        let s = to_csv(&m);
        assert_eq!(
            s,
            "1.0000000000000000e0,5.0000000000000000e-1\n-2.0000000000000000e0,1.0000000000000001e-1\n"
        );
    }

    #[test]
    fn json_layout_is_row_major() {
        let m = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert_eq!(
            to_json(&m),
            r#"{"rows": 2, "cols": 1, "data": [1.0000000000000000e0, 2.0000000000000000e0]}"#
        );
        let back = from_json(r#"{"rows": 1, "cols": 2, "data": [3, 4]}"#).unwrap();
        assert_eq!(back, DMatrix::from_row_slice(1, 2, &[3.0, 4.0]));
    }

    #[test]
    fn malformed_inputs() {
        assert!(from_csv("1,2\n3\n").is_err());
        assert!(from_csv("1,x\n").is_err());
        assert!(from_csv("").is_err());
        assert!(from_json(r#"{"rows": 2, "cols": 2, "data": [1, 2, 3]}"#).is_err());
        assert!(from_json("[1, 2]").is_err());
    }

    #[test]
    fn hand_written_csv() {
        let m = from_csv("1, 2\n\n3,4\n").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    proptest! {
        #[test]
        fn formats_round_trip_bit_exactly(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 16),
        ) {
            let m = DMatrix::from_fn(rows, cols, |i, j| seed[(i * cols + j) % seed.len()]);
            let via_csv = from_csv(&to_csv(&m)).unwrap();
            let via_json = from_json(&to_json(&m)).unwrap();
            for ((a, b), c) in m.iter().zip(via_csv.iter()).zip(via_json.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
                prop_assert_eq!(a.to_bits(), c.to_bits());
            }
        }
    }
}
