//! Plot-ready output files: comma-delimited tables with a header row,
//! plus key/value summary files.
//!
//! Numbers are printed with Rust's shortest round-trip formatting, so a
//! re-parse recovers the in-memory `f64` exactly. Undefined cells
//! (leading unfit periods, unavailable statistics) are left empty.

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Shortest representation that parses back to the same bits.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_table<I>(path: &Path, headers: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(headers)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    for row in rows {
        debug_assert_eq!(row.len(), headers.len());
        w.write_record(&row)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    w.flush()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Self-describing `key: value` lines.
pub fn write_summary(path: &Path, pairs: &[(String, String)]) -> CliResult<()> {
    let mut text = String::new();
    for (k, v) in pairs {
        text.push_str(k);
        text.push_str(": ");
        text.push_str(v);
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Ensures the output directory exists and joins a file name onto it.
pub fn out_path(dir: &Path, file: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Input(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    Ok(dir.join(file))
}
