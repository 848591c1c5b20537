use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    pub seed: u64,
    /// Resolved configuration; passing it back with `--config` repeats the run.
    pub config_toml: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub elapsed_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub struct ManifestBuilder {
    command: String,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Hashes every recorded file and writes `<dir>/<command>.manifest.json`
    /// plus the resolved `<dir>/<command>.config.toml`.
    pub fn finish(self, config: &RunConfig, dir: &Path) -> Result<RunManifest, CliError> {
        let digest = |paths: &[PathBuf]| -> Result<Vec<FileDigest>, CliError> {
            paths
                .iter()
                .filter(|p| p.is_file())
                .map(|p| {
                    Ok(FileDigest {
                        path: p.clone(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let manifest = RunManifest {
            command: self.command.clone(),
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            config_toml: config.to_toml(),
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        };
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let cfg_path = dir.join(format!("{}.config.toml", self.command));
        fs::write(&cfg_path, &manifest.config_toml).map_err(|e| CliError::io(&cfg_path, e))?;
        let path = dir.join(format!("{}.manifest.json", self.command));
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
