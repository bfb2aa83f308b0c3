//! Run directories and their manifests.
//!
//! A run directory is complete only once `manifest.txt` exists: it is
//! written last and lists the SHA-256 digest of every artifact. Timestamps
//! live in the manifest alone, so artifacts of identical runs are
//! byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::error::{io_error, CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const MANIFEST_HEADER: &str = "kinex manifest v1";

pub struct RunDir {
    path: PathBuf,
    artifacts: Vec<(String, String)>,
    started: Instant,
}

fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

impl RunDir {
    /// Creates the directory and removes a manifest left by an earlier run.
    pub fn create(path: impl Into<PathBuf>) -> CliResult<Self> {
        let path = path.into();
        fs::create_dir_all(&path).map_err(io_error(&path))?;
        let stale = path.join(MANIFEST_FILE);
        if stale.exists() {
            fs::remove_file(&stale).map_err(io_error(&stale))?;
        }
        Ok(Self {
            path,
            artifacts: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let target = self.path.join(name);
        fs::write(&target, bytes).map_err(io_error(&target))?;
        self.artifacts.push((name.to_string(), digest(bytes)));
        Ok(())
    }

    /// Renders an artifact into memory with a core writer, then writes it.
    pub fn write_with(
        &mut self,
        name: &str,
        render: impl FnOnce(&mut Vec<u8>) -> kinex_core::Result<()>,
    ) -> CliResult<()> {
        let mut bytes = Vec::new();
        render(&mut bytes)?;
        self.write(name, &bytes)
    }

    /// Writes the manifest; the run directory is complete afterwards.
    pub fn finish(self, command: &str, config: &[(String, String)]) -> CliResult<PathBuf> {
        let finished = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut text = format!("manifest={MANIFEST_HEADER}\ncommand={command}\n");
        text.push_str(&format!("version.kinex={}\n", env!("CARGO_PKG_VERSION")));
        for (key, value) in config {
            text.push_str(&format!("config.{key}={value}\n"));
        }
        for (name, hash) in &self.artifacts {
            text.push_str(&format!("artifact.{name}={hash}\n"));
        }
        text.push_str(&format!("wall_time_s={:.3}\n", self.started.elapsed().as_secs_f64()));
        text.push_str(&format!("finished_unix={finished}\n"));
        let target = self.path.join(MANIFEST_FILE);
        fs::write(&target, text).map_err(io_error(&target))?;
        Ok(self.path)
    }
}

/// Reads a manifest into its key/value pairs.
pub fn read_manifest(dir: &Path) -> CliResult<BTreeMap<String, String>> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_error(&path))?;
    let mut entries = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("manifest line `{line}` is not key=value")))?;
        entries.insert(key.to_string(), value.to_string());
    }
    if entries.get("manifest").map(String::as_str) != Some(MANIFEST_HEADER) {
        return Err(CliError::Config(format!("{} is not a kinex manifest", path.display())));
    }
    Ok(entries)
}

/// Artifacts whose current digest differs from the manifest's.
pub fn tampered_artifacts(dir: &Path) -> CliResult<Vec<String>> {
    let entries = read_manifest(dir)?;
    let mut bad = Vec::new();
    for (key, expected) in &entries {
        if let Some(name) = key.strip_prefix("artifact.") {
            let path = dir.join(name);
            let matches = fs::read(&path)
                .map(|bytes| &digest(&bytes) == expected)
                .unwrap_or(false);
            if !matches {
                bad.push(name.to_string());
            }
        }
    }
    Ok(bad)
}
