//! Run manifests and artifact headers: every artifact records the producing
//! command, config hash and seeds, either in `#` header comments (CSV) or a
//! sidecar manifest (JSONL, checkpoints).

use std::path::Path;
use std::process::Command;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn config_hash(config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    let out = h.finalize();
    out.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub config: String,
    pub data_seed: u64,
    pub model_seed: u64,
    pub git: String,
    pub artifacts: Vec<String>,
    /// False while the run is in flight; artifacts of incomplete runs are
    /// suspect.
    pub complete: bool,
}

impl RunManifest {
    pub fn new(command: &str, config_text: &str, data_seed: u64, model_seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            config_hash: config_hash(config_text),
            config: config_text.into(),
            data_seed,
            model_seed,
            git: git_describe(),
            artifacts: Vec::new(),
            complete: false,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(dir: &Path) -> Result<RunManifest> {
        let path = dir.join("manifest.json");
        let text =
            std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `#`-prefixed header lines identifying an artifact's provenance.
pub fn csv_header(command: &str, config_hash: &str, data_seed: u64, model_seed: u64) -> String {
    format!(
        "# produced_by: {command}\n# config_hash: {config_hash}\n# data_seed: {data_seed}\n# model_seed: {model_seed}\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash("x = 1");
        assert_eq!(a, config_hash("x = 1"));
        assert_ne!(a, config_hash("x = 2"));
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("lenxfer train --config t.toml", "x = 1", 3, 4);
        m.artifacts.push("metrics.csv".into());
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back.config_hash, m.config_hash);
        assert_eq!(back.data_seed, 3);
        assert!(!back.complete);
    }

    #[test]
    fn header_is_comment_only() {
        let h = csv_header("lenxfer eval", "abc", 1, 2);
        assert!(h.lines().all(|l| l.starts_with('#')));
    }
}
