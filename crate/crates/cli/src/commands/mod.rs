//! One module per subcommand, plus small helpers they share.

pub mod compare;
pub mod detect;
pub mod fit;
pub mod netstats;
pub mod predict;
pub mod simulate;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{read_input, CliError, CliResult};

/// Parses a JSON config file, reporting a validation error naming the file.
pub fn parse_json_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// Serializes a config snapshot for the manifest.
pub fn to_value<T: Serialize>(value: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(value)
        .map_err(|e| CliError::runtime(format!("config snapshot failed: {e}")))
}

/// Creates the parent directory of a file output if it is missing.
pub fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    Ok(())
}

/// Creates a directory output.
pub fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))
}

/// A companion file next to `out`: `report.csv` + `-scores` →
/// `report-scores.csv`.
pub fn sibling_file(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let name = match out.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    out.with_file_name(name)
}

/// Empty string for absent optional reals (CSV cells).
pub fn opt_float(x: Option<f64>) -> String {
    x.map(crate::io::fmt_float).unwrap_or_default()
}
