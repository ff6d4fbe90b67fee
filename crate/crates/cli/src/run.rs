//! Run directories and their manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::Command;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Everything needed to replay a run, plus what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub run_id: String,
    pub timestamp_unix: u64,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub invocation: Command,
    pub trials: Option<u64>,
    pub master_seed: u64,
    pub preset: String,
    pub config: Config,
    pub outputs: Vec<String>,
}

/// Inputs that determine a run's numeric outputs.
#[derive(Serialize)]
struct RunKey<'a> {
    invocation: &'a Command,
    trials: Option<u64>,
    master_seed: u64,
    config: &'a Config,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_sha256: Option<String>,
}

/// `<command>-<12 hex digits>`, a digest of everything that affects the outputs,
/// including the contents of an input file.
pub fn run_id(
    invocation: &Command,
    trials: Option<u64>,
    master_seed: u64,
    config: &Config,
) -> anyhow::Result<String> {
    let input_sha256 = match invocation {
        Command::Fit { input } => {
            let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
            Some(hex::encode(Sha256::digest(&bytes)))
        }
        _ => None,
    };
    let key = RunKey {
        invocation,
        trials,
        master_seed,
        config,
        input_sha256,
    };
    let bytes = serde_json::to_vec(&key)?;
    let digest = Sha256::digest(&bytes);
    Ok(format!("{}-{}", invocation.name(), &hex::encode(digest)[..12]))
}

/// Output directory of a single run. Files are written atomically.
pub struct RunDir {
    path: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path, run_id: &str) -> anyhow::Result<Self> {
        let path = root.join(run_id);
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path,
            outputs: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// Writes `name` via a temporary sibling and a rename.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let target = self.path.join(name);
        let tmp = self.path.join(format!(".{name}.tmp-{}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &target).with_context(|| format!("renaming into {}", target.display()))?;
        if name != MANIFEST_NAME && !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Renders CSV through `f` into memory, then writes it atomically.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> anyhow::Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> anyhow::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn read_manifest(path: &Path) -> anyhow::Result<RunManifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m: RunManifest = serde_json::from_str(&text)
        .map_err(|e| crate::UsageError(format!("manifest {}: {e}", path.display())))?;
    m.config.validate()?;
    Ok(m)
}
