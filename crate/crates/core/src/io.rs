//! Small helpers for the CSV and JSON artifacts.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Formats a float with 9 significant digits, `%.9g` style.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        // Rounding may carry into a new digit (9.99999999e-1 -> 1.00000000); still 9 sig digits at most.
        trim_fraction(s)
    } else {
        let s = format!("{v:.8e}");
        let (mantissa, exponent) = s.split_once('e').expect("scientific format");
        format!("{}e{}", trim_fraction(mantissa.to_string()), exponent)
    }
}

fn trim_fraction(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Writes `header` followed by `rows` (already joined by commas).
pub fn write_csv<I>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let emit = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

/// Reads a CSV file, checks its header and returns the rows split into fields.
pub fn read_csv(path: &Path, expected_header: &str) -> Result<Vec<Vec<String>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .unwrap_or_default();
    if header.trim() != expected_header {
        return Err(Error::Serde(format!(
            "{}: expected header `{expected_header}`, found `{}`",
            path.display(),
            header.trim()
        )));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(line.trim().split(',').map(str::to_string).collect());
    }
    Ok(rows)
}

pub(crate) fn parse_field<T: std::str::FromStr>(row: &[String], idx: usize, what: &str) -> Result<T> {
    row.get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Serde(format!("bad or missing `{what}` field in row {row:?}")))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

/// Hex SHA-256 of a file's contents.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
