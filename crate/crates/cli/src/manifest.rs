//! Run manifests: a JSON record of what a command read, wrote, and was
//! configured with, so every output is reproducible from (inputs, config,
//! seed).
//!
//! Directory-producing commands write `manifest.json` inside the output
//! directory; file-producing commands write `<file>.manifest.json` next to
//! the output. The creation timestamp is the only field that changes
//! between identical reruns. Manifests never digest other manifests, so
//! digests of a directory's data files stay stable across reruns.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::io::write_json;

/// One file's content digest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// The reproducibility record every command writes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub software_version: String,
    pub created_unix: u64,
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn digest_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::runtime(format!("cannot digest {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn is_manifest(path: &Path) -> bool {
    path.file_name()
        .map(|n| n.to_string_lossy().ends_with("manifest.json"))
        .unwrap_or(false)
}

/// Digests an input path. A directory contributes every regular file
/// directly inside it (sorted by name, manifests excluded); a file
/// contributes itself.
pub fn digest_input(path: &Path) -> CliResult<Vec<FileDigest>> {
    if !path.is_dir() {
        return Ok(vec![FileDigest {
            path: path.display().to_string(),
            sha256: digest_file(path)?,
        }]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && !is_manifest(p))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: digest_file(p)?,
            })
        })
        .collect()
}

/// Digests the files a command wrote.
pub fn digest_outputs(paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: digest_file(p)?,
            })
        })
        .collect()
}

/// Assembles and writes the manifest for one command invocation.
/// `target` is the command's --out path: a directory gets
/// `manifest.json` inside it, a file gets a `.manifest.json` sibling.
pub fn write_run_manifest(
    target: &Path,
    command: &str,
    argv: &[String],
    config: serde_json::Value,
    seed: Option<u64>,
    input_paths: &[&Path],
    output_paths: &[PathBuf],
) -> CliResult<PathBuf> {
    let mut inputs = Vec::new();
    for path in input_paths {
        inputs.extend(digest_input(path)?);
    }
    let manifest = RunManifest {
        format_version: 1,
        command: command.to_string(),
        argv: argv.to_vec(),
        config,
        seed,
        inputs,
        outputs: digest_outputs(output_paths)?,
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let manifest_path = if target.is_dir() {
        target.join("manifest.json")
    } else {
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".to_string());
        target.with_file_name(format!("{name}.manifest.json"))
    };
    write_json(&manifest_path, &manifest)?;
    Ok(manifest_path)
}
