//! Run manifests: provenance for every data-producing command.
//!
//! A manifest records the command, tool version, effective configuration,
//! seeds, and sha256 digests of all inputs and outputs. It lives next to the
//! output as `<output>.manifest.json`, is written atomically (temp file then
//! rename), and backs resume checks: when inputs, configuration, and the
//! existing output all still match, the command can skip its work.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Snapshot of the configuration values that shaped this run.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Input digests keyed by role (for example "corpus", "passages").
    pub inputs: BTreeMap<String, FileDigest>,
    /// Output digests keyed by role.
    pub outputs: BTreeMap<String, FileDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn begin(command: impl Into<String>, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    pub fn seed(&mut self, name: impl Into<String>, value: u64) -> &mut Self {
        self.seeds.insert(name.into(), value);
        self
    }

    pub fn input(&mut self, role: impl Into<String>, path: &Path) -> Result<&mut Self> {
        let digest = FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        };
        self.inputs.insert(role.into(), digest);
        Ok(self)
    }

    pub fn output(&mut self, role: impl Into<String>, path: &Path) -> Result<&mut Self> {
        let digest = FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        };
        self.outputs.insert(role.into(), digest);
        Ok(self)
    }

    /// Stamp the finish time and write atomically next to `output_path`.
    pub fn finish_and_write(mut self, output_path: &Path) -> Result<PathBuf> {
        self.finished_unix = unix_now();
        let manifest_path = manifest_path_for(output_path);
        let json = serde_json::to_string_pretty(&self)?;
        write_atomic(&manifest_path, json.as_bytes())?;
        Ok(manifest_path)
    }
}

pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

/// Write via a temp file in the same directory plus rename, so readers never
/// observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp{}",
            path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default(),
            std::process::id()
        )),
        None => PathBuf::from(format!(".{}.tmp{}", path.display(), std::process::id())),
    };
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// True when a previous run of `command` is still valid: its manifest
/// parses, the config snapshot matches, every recorded input digest matches
/// the file on disk now, and every recorded output still exists with its
/// recorded digest.
pub fn is_up_to_date(
    output_path: &Path,
    command: &str,
    config: &serde_json::Value,
    inputs: &BTreeMap<String, PathBuf>,
) -> bool {
    let manifest_path = manifest_path_for(output_path);
    let Ok(manifest) = load_manifest(&manifest_path) else {
        return false;
    };
    if manifest.command != command || &manifest.config != config {
        return false;
    }
    if manifest.inputs.len() != inputs.len() {
        return false;
    }
    for (role, path) in inputs {
        let Some(recorded) = manifest.inputs.get(role) else {
            return false;
        };
        let Ok(current) = sha256_file(path) else {
            return false;
        };
        if recorded.sha256 != current {
            return false;
        }
    }
    for digest in manifest.outputs.values() {
        let Ok(current) = sha256_file(Path::new(&digest.path)) else {
            return false;
        };
        if digest.sha256 != current {
            return false;
        }
    }
    true
}
