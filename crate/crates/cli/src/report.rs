//! Artifact writing and the JSON experiment report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub name: String,
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    /// Passes when `value > tolerance`.
    pub fn above(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            pass: value > tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub diagnostics: Value,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Collects artifacts in memory and writes them once the experiment is done.
#[derive(Debug, Default)]
pub struct ArtifactSet {
    entries: Vec<(String, String, Vec<u8>)>,
}

impl ArtifactSet {
    pub fn add(&mut self, name: &str, file: &str, bytes: Vec<u8>) {
        self.entries.push((name.to_string(), file.to_string(), bytes));
    }

    pub fn write(self, dir: &Path) -> Result<Vec<Artifact>> {
        let mut out = Vec::with_capacity(self.entries.len());
        for (name, file, bytes) in self.entries {
            let path: PathBuf = dir.join(&file);
            write_bytes(&path, &bytes)?;
            out.push(Artifact {
                name,
                file,
                bytes: bytes.len(),
                sha256: sha256_hex(&bytes),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn checks_compare_against_tolerance() {
        assert!(Check::at_most("a", 1e-4, 1e-3).pass);
        assert!(!Check::at_most("a", 1e-2, 1e-3).pass);
        assert!(!Check::above("f", 0.0, 0.0).pass);
    }
}
