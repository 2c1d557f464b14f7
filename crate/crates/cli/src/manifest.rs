//! Run manifests: what was run, with which resolved settings, on which files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use mccseg::report::sha256_hex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> anyhow::Result<Self> {
        let data = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            bytes: data.len() as u64,
            sha256: sha256_hex(&data),
        })
    }
}

/// Written next to every command's outputs. Passing it back through
/// `--config` reruns the command with the same settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub argv: Vec<String>,
    /// Fully resolved settings, in the same keys the config file accepts.
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix_ms: u128,
    pub elapsed_seconds: f64,
}

/// Collects inputs and outputs while a command runs.
pub struct Recorder {
    command: String,
    argv: Vec<String>,
    started: Instant,
    started_unix_ms: u128,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn start(command: &str, argv: &[String]) -> Self {
        Self {
            command: command.into(),
            argv: argv.to_vec(),
            started: Instant::now(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Records every regular file directly inside `dir`, sorted by name.
    pub fn input_dir(&mut self, dir: &Path) -> anyhow::Result<()> {
        let mut files = Vec::new();
        for entry in fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
            let path = entry?.path();
            if path.is_file() && path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
                files.push(path);
            }
        }
        files.sort();
        self.inputs.extend(files);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn outputs(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.outputs.extend(paths);
    }

    /// Hashes everything recorded and writes `<out_dir>/manifest.json`.
    pub fn finish<C: Serialize>(
        self,
        out_dir: &Path,
        config: &C,
        seed: Option<u64>,
    ) -> anyhow::Result<PathBuf> {
        let digest = |paths: &[PathBuf]| {
            paths
                .iter()
                .map(|p| FileDigest::of(p))
                .collect::<anyhow::Result<Vec<_>>>()
        };
        let manifest = RunManifest {
            tool: format!("mccseg {}", env!("CARGO_PKG_VERSION")),
            command: self.command,
            argv: self.argv,
            config: serde_json::to_value(config)?,
            seed,
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
            started_unix_ms: self.started_unix_ms,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = out_dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
