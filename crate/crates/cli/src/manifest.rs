use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.json";

/// Everything needed to repeat a run. `argv` excludes the output directory
/// so a rerun can target a fresh one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub config_overrides: Vec<String>,
    pub out: PathBuf,
    pub tool_version: String,
    pub wall_clock_unix_s: u64,
    /// Hash of command, argv and tool version.
    pub recipe_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub recipe_sha256: String,
    /// Output file, relative to the run directory, to its SHA-256.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, scenario: String, seeds: Vec<u64>, config_overrides: Vec<String>, out: &Path) -> RunManifest {
        let tool_version = env!("CARGO_PKG_VERSION").to_string();
        let recipe = serde_json::json!({ "command": command, "argv": argv, "tool_version": tool_version });
        RunManifest {
            command: command.to_string(),
            recipe_sha256: sha256_hex(recipe.to_string().as_bytes()),
            argv,
            scenario,
            seeds,
            config_overrides,
            out: out.to_path_buf(),
            tool_version,
            wall_clock_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Collects output files as they are written.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<OutputDir> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    /// Writes through a temporary file and a rename, so readers never see a
    /// partial file.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let tmp = path.with_extension("partial");
        fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_manifest(&mut self, manifest: &RunManifest) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(manifest)?;
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    pub fn finish(self, manifest: &RunManifest) -> Result<RunResults> {
        let results = RunResults {
            recipe_sha256: manifest.recipe_sha256.clone(),
            files: self.files,
        };
        let path = self.root.join(RESULTS_FILE);
        fs::write(&path, serde_json::to_vec_pretty(&results)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(results)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn recipe_ignores_output_and_clock() {
        let a = RunManifest::new("plan", vec!["plan".into()], "tiny".into(), vec![0], vec![], Path::new("a"));
        let b = RunManifest::new("plan", vec!["plan".into()], "tiny".into(), vec![0], vec![], Path::new("b"));
        assert_eq!(a.recipe_sha256, b.recipe_sha256);
        let c = RunManifest::new("plan", vec!["plan".into(), "--k".into(), "3".into()], "tiny".into(), vec![0], vec![], Path::new("a"));
        assert_ne!(a.recipe_sha256, c.recipe_sha256);
    }
}
