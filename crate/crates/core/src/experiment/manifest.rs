use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::files::MANIFEST;
use crate::error::Result;
use crate::linalg::GENERATOR_ID;

pub const SOFTWARE: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub generator: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageRecord>,
    /// Output files relative to the experiment directory, with SHA-256 digests.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            software: SOFTWARE.to_string(),
            generator: GENERATOR_ID.to_string(),
            config: config.resolved(),
            stages: Vec::new(),
            files: BTreeMap::new(),
        }
    }

    /// The manifest already in `dir`, or a fresh one. A stored manifest for a
    /// different configuration is discarded.
    pub fn load_or_new(dir: &Path, config: &ExperimentConfig) -> Self {
        let fresh = Self::new(config);
        std::fs::read_to_string(dir.join(MANIFEST))
            .ok()
            .and_then(|text| serde_json::from_str::<Manifest>(&text).ok())
            .filter(|m| m.config == fresh.config)
            .unwrap_or(fresh)
    }

    /// Replaces any earlier record of the same stage.
    pub fn record_stage(&mut self, stage: &str, outcome: std::result::Result<(), String>) {
        self.stages.retain(|s| s.stage != stage);
        self.stages.push(match outcome {
            Ok(()) => StageRecord {
                stage: stage.to_string(),
                status: StageStatus::Ok,
                error: None,
            },
            Err(e) => StageRecord {
                stage: stage.to_string(),
                status: StageStatus::Failed,
                error: Some(e),
            },
        });
    }

    pub fn failed_stages(&self) -> impl Iterator<Item = &StageRecord> {
        self.stages.iter().filter(|s| s.status == StageStatus::Failed)
    }

    /// Hashes `relative` paths under `dir`; files that do not exist are
    /// dropped from the listing.
    pub fn record_files(&mut self, dir: &Path, relative: &[PathBuf]) -> Result<()> {
        for rel in relative {
            let key = rel.to_string_lossy().replace('\\', "/");
            match std::fs::read(dir.join(rel)) {
                Ok(bytes) => {
                    self.files.insert(key, sha256_hex(&bytes));
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    self.files.remove(&key);
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST), text)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn stages_and_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        let cfg = ExperimentConfig::default();
        let mut m = Manifest::new(&cfg);
        m.record_stage("find", Err("boom".into()));
        m.record_stage("catalog", Ok(()));
        m.record_stage("find", Ok(()));
        assert_eq!(m.stages.len(), 2);
        assert_eq!(m.failed_stages().count(), 0);
        m.record_files(dir.path(), &[PathBuf::from("a.csv"), PathBuf::from("missing.csv")])
            .unwrap();
        assert_eq!(m.files.len(), 1);
        assert_eq!(m.files["a.csv"], sha256_hex(b"x\n1\n"));
        m.write(dir.path()).unwrap();

        let back = Manifest::load_or_new(dir.path(), &cfg);
        assert_eq!(back, m);
        assert_eq!(back.config.d, Some(8));
        assert!(back.generator.contains("ChaCha20"));

        let other = ExperimentConfig {
            seed: 9,
            ..cfg
        };
        assert!(Manifest::load_or_new(dir.path(), &other).stages.is_empty());
    }
}
