//! Run manifest written next to every command's artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Crate version followed by the `git describe` of the build tree.
pub fn version_string() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("PMSN_GIT_DESCRIBE"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub version: String,
    pub started_at: String,
    pub output_dir: PathBuf,
    /// Artifact file names, relative to `output_dir`.
    pub artifacts: Vec<String>,
    /// `running`, `ok`, or the error message of a failed run.
    pub status: String,
}

impl RunManifest {
    pub fn start(command: &str, config: &RunConfig, output_dir: &Path) -> Self {
        RunManifest {
            command: command.into(),
            config: config.clone(),
            seed: config.seed,
            version: version_string(),
            started_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            output_dir: output_dir.to_path_buf(),
            artifacts: Vec::new(),
            status: "running".into(),
        }
    }

    /// Path of artifact `name` inside the output directory; the name is
    /// recorded in the artifact list.
    pub fn artifact(&mut self, name: &str) -> PathBuf {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.into());
        }
        self.output_dir.join(name)
    }

    pub fn write(&self) -> Result<()> {
        let path = self.output_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_and_lists_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.seed = 42;
        let mut m = RunManifest::start("simulate", &cfg, dir.path());
        assert_eq!(m.artifact("a.csv"), dir.path().join("a.csv"));
        m.artifact("a.csv");
        m.artifact("b.json");
        m.write().unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.artifacts, vec!["a.csv", "b.json"]);
        assert_eq!(back.seed, 42);
        assert!(back.version.starts_with(env!("CARGO_PKG_VERSION")));
        assert!(chrono::DateTime::parse_from_rfc3339(&back.started_at).is_ok());
    }
}
