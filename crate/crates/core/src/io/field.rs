//! Plain-text scalar fields (design checkpoints) and CSV logs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::optimizer::OptLog;

/// One value per line, written with enough digits to round-trip exactly.
pub fn field_to_string(values: &[f64]) -> String {
    let mut s = String::with_capacity(24 * values.len());
    for v in values {
        let _ = writeln!(s, "{v:e}");
    }
    s
}

pub fn parse_field(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(k, l)| {
            l.parse::<f64>()
                .map_err(|_| Error::config(format!("field value {k}: cannot parse '{l}'")))
        })
        .collect()
}

pub fn write_field(path: &Path, values: &[f64]) -> Result<()> {
    std::fs::write(path, field_to_string(values)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_field(&text)
}

/// Writes the convergence log with one row per iteration.
pub fn export_csv(log: &OptLog, path: &Path) -> Result<()> {
    std::fs::write(path, log.to_csv()).map_err(|e| Error::io(path, e))
}
