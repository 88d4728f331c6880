//! Run configuration shared by the CLI flags and the optional TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Keys accepted in a config file; each mirrors a global CLI flag.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(alias = "tol-scale")]
    pub tol_scale: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

/// Settings that influence scenario results. Thread count and output paths
/// are deliberately absent: they never change a number in a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    /// Divides every check tolerance and numerical tolerance; values above 1
    /// make a run stricter.
    pub tol_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { tol_scale: 1.0 }
    }
}

impl RunConfig {
    pub fn new(tol_scale: f64) -> Result<Self> {
        if !(tol_scale >= 1.0 && tol_scale.is_finite()) {
            return Err(HarnessError::Config(format!("tol-scale must be a finite number >= 1, got {tol_scale}")));
        }
        Ok(Self { tol_scale })
    }

    pub fn tol(&self, t: f64) -> f64 {
        t / self.tol_scale
    }

    /// Hex SHA-256 of the toolkit version and the canonical JSON of this config.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(crate::VERSION.as_bytes());
        h.update(serde_json::to_vec(self).unwrap_or_default());
        hex::encode(h.finalize())
    }
}
