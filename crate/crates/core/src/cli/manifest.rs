//! Run manifest: what was run, on which inputs, producing which files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::synth::SyntheticRun;
use crate::error::{Error, Result};
use crate::health::Metric;

use super::config::Config;

pub const MANIFEST_FILE: &str = "manifest.json";

/// A fully resolved command. Executing it again reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    Train {
        config: Config,
    },
    Score {
        run: PathBuf,
        config: Config,
        per_window: bool,
    },
    Evaluate {
        run: PathBuf,
        config: Config,
        metrics: Vec<Metric>,
    },
    Sweep {
        run: PathBuf,
        config: Config,
    },
    Compare {
        config: Config,
    },
    Synth {
        run: SyntheticRun,
    },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::Train { .. } => "train",
            Invocation::Score { .. } => "score",
            Invocation::Evaluate { .. } => "evaluate",
            Invocation::Sweep { .. } => "sweep",
            Invocation::Compare { .. } => "compare",
            Invocation::Synth { .. } => "synth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub argv: Vec<String>,
    pub invocation: Invocation,
    /// Files read by the run.
    pub inputs: Vec<FileHash>,
    /// Files written by the run, relative to its output directory.
    pub artifacts: Vec<FileHash>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Errors on the first recorded input whose content changed.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let now = sha256_file(&input.path)?;
            if now != input.sha256 {
                return Err(Error::FingerprintMismatch {
                    expected: format!("{} {}", input.path.display(), input.sha256),
                    actual: format!("{} {now}", input.path.display()),
                });
            }
        }
        Ok(())
    }

    /// Errors on the first recorded artifact that differs under `out_dir`.
    pub fn verify_artifacts(&self, out_dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let path = out_dir.join(&a.path);
            let now = sha256_file(&path)?;
            if now != a.sha256 {
                return Err(Error::FingerprintMismatch {
                    expected: format!("{} {}", a.path.display(), a.sha256),
                    actual: format!("{} {now}", path.display()),
                });
            }
        }
        Ok(())
    }
}
