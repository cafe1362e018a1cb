//! Run-manifest plumbing for data-producing commands: declare the command,
//! its effective configuration, and its inputs up front; check whether the
//! previous run still stands; record digests once the outputs exist.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use limgen_core::manifest::{self, RunManifest};
use limgen_core::Result;

pub struct ManifestPlan {
    manifest: RunManifest,
    command: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, PathBuf>,
}

impl ManifestPlan {
    /// Start a plan. `config` must capture every knob that shapes the
    /// output, because resumption compares it verbatim.
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        ManifestPlan {
            manifest: RunManifest::begin(command, config.clone()),
            command: command.to_string(),
            config,
            inputs: BTreeMap::new(),
        }
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.manifest.seed(name, value);
        self
    }

    pub fn input(mut self, role: &str, path: &Path) -> Self {
        self.inputs.insert(role.to_string(), path.to_path_buf());
        self
    }

    pub fn maybe_input(self, role: &str, path: Option<&PathBuf>) -> Self {
        match path {
            Some(p) => self.input(role, p),
            None => self,
        }
    }

    /// True when the previous run of this command is still valid for
    /// `primary_output`: same command, same config, same input digests, and
    /// all recorded outputs still on disk unchanged.
    pub fn is_up_to_date(&self, primary_output: &Path) -> bool {
        manifest::is_up_to_date(primary_output, &self.command, &self.config, &self.inputs)
    }

    /// Hash inputs and outputs and write the manifest next to the primary
    /// output. Call after every output file has been written.
    pub fn write(mut self, outputs: &[(&str, &Path)], primary_output: &Path) -> Result<PathBuf> {
        for (role, path) in &self.inputs {
            self.manifest.input(role.clone(), path)?;
        }
        for (role, path) in outputs {
            self.manifest.output(*role, path)?;
        }
        self.manifest.finish_and_write(primary_output)
    }
}

/// Standard skip notice for resumable commands.
pub fn print_skip(primary_output: &Path) {
    println!(
        "{}: outputs match the run manifest; skipping",
        primary_output.display()
    );
}
