use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FORMAT: u32 = 1;
/// Bumped whenever a CSV header changes.
pub const CSV_SCHEMA: u32 = 1;
pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub command: Vec<String>,
    /// The `--config` file the run started from, if any.
    pub config_path: Option<String>,
    /// SHA-256 of the resolved config as written to `config.json`.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` wins when set.
    pub timestamp: u64,
    pub csv_schema: u32,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })
}

/// Writes `config.json`, every output file and `manifest.json` into `dir`.
pub struct RunWriter {
    pub dir: PathBuf,
    pub command: Vec<String>,
    pub config_path: Option<String>,
    pub seeds: Vec<u64>,
}

impl RunWriter {
    pub fn finish(self, config_json: &str, outputs: &[(&str, String)]) -> Result<RunManifest, CliError> {
        fs::create_dir_all(&self.dir).map_err(|source| CliError::Io {
            path: self.dir.clone(),
            source,
        })?;
        write(&self.dir, CONFIG_FILE, config_json.as_bytes())?;
        let mut files = Vec::with_capacity(outputs.len());
        for (name, body) in outputs {
            write(&self.dir, name, body.as_bytes())?;
            files.push(OutputFile {
                path: name.to_string(),
                sha256: sha256_hex(body.as_bytes()),
            });
        }
        let manifest = RunManifest {
            format: MANIFEST_FORMAT,
            command: self.command,
            config_path: self.config_path,
            config_hash: sha256_hex(config_json.as_bytes()),
            seeds: self.seeds,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp(),
            csv_schema: CSV_SCHEMA,
            outputs: files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write(&self.dir, MANIFEST_FILE, text.as_bytes())?;
        Ok(manifest)
    }
}

#[derive(Debug, Serialize)]
pub struct ManifestCheck {
    pub config_hash_ok: bool,
    pub outputs: Vec<(String, bool)>,
}

impl ManifestCheck {
    pub fn ok(&self) -> bool {
        self.config_hash_ok && self.outputs.iter().all(|(_, ok)| *ok)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Accepts the manifest file or the run directory holding it.
pub fn load(path: &Path) -> Result<(PathBuf, RunManifest), CliError> {
    let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let manifest: RunManifest = serde_json::from_slice(&read(&file)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(CliError::Config(format!("unsupported manifest format {}", manifest.format)));
    }
    let dir = file.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    Ok((dir, manifest))
}

/// Recomputes the config hash and every output hash.
pub fn check(dir: &Path, manifest: &RunManifest) -> Result<ManifestCheck, CliError> {
    let config = read(&dir.join(CONFIG_FILE))?;
    let mut outputs = Vec::new();
    for f in &manifest.outputs {
        let ok = match fs::read(dir.join(&f.path)) {
            Ok(bytes) => sha256_hex(&bytes) == f.sha256,
            Err(_) => false,
        };
        outputs.push((f.path.clone(), ok));
    }
    Ok(ManifestCheck {
        config_hash_ok: sha256_hex(&config) == manifest.config_hash,
        outputs,
    })
}
