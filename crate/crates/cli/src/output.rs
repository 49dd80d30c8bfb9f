//! Deterministic artifact writing: CSV tables with unit-bearing headers and
//! JSON records with stable key order.

use std::fs;
use std::path::{Path, PathBuf};

/// Write a CSV file from a header and preformatted rows.
pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> std::io::Result<PathBuf> {
    let mut text = String::from(header);
    if !text.ends_with('\n') {
        text.push('\n');
    }
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

/// Write pre-rendered text.
pub fn write_text(dir: &Path, name: &str, text: &str) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

/// Write a serde value as pretty JSON (struct field order is preserved).
pub fn write_json<T: serde::Serialize>(
    dir: &Path,
    name: &str,
    value: &T,
) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(&path, text)?;
    Ok(path)
}

/// Shortest-roundtrip float formatting (deterministic for a given binary).
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}
