//! Output directories that are written all at once or not at all.
//!
//! Commands assemble every file in memory as a [`Bundle`] and only then touch
//! the disk. A directory this tool created before (recognised by its
//! `manifest.json`) is replaced; any other non-empty directory is left alone
//! and the command fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const ENV_OUTPUT_DIR: &str = "FSTEFAN_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "fstefan-output";
pub const MANIFEST: &str = "manifest.json";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Root for all outputs: `--out`, then the environment, then the default.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(ENV_OUTPUT_DIR) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}

#[derive(Debug, Default)]
pub struct Bundle {
    /// Relative path and contents. Paths may contain `/` for sub-directories.
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a Value,
    wall_clock_seconds: f64,
    files: Vec<&'a str>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Moves another bundle's files under `prefix/`.
    pub fn nest(&mut self, prefix: &str, other: Bundle) {
        for (name, bytes) in other.files {
            self.files.push((format!("{prefix}/{name}"), bytes));
        }
    }

    /// Appends `manifest.json` listing every file, itself included.
    pub fn seal(&mut self, config: &Value, elapsed: Duration) -> Result<()> {
        let mut names: Vec<&str> = self.files.iter().map(|(n, _)| n.as_str()).collect();
        names.push(MANIFEST);
        let manifest = Manifest {
            tool: "fstefan",
            version: VERSION,
            config,
            wall_clock_seconds: elapsed.as_secs_f64(),
            files: names,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        self.files.push((MANIFEST.to_string(), bytes));
        Ok(())
    }

    /// Writes into `dir`. On failure the directory is removed again so no
    /// partial output is left behind.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        prepare(dir)?;
        let result = self.write_files(dir);
        if result.is_err() {
            let _ = fs::remove_dir_all(dir);
        }
        result.with_context(|| format!("cannot write outputs to {}", dir.display()))
    }

    fn write_files(&self, dir: &Path) -> Result<()> {
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

fn prepare(dir: &Path) -> Result<()> {
    if dir.exists() {
        let empty = fs::read_dir(dir)
            .with_context(|| format!("cannot read {}", dir.display()))?
            .next()
            .is_none();
        if !empty {
            if !dir.join(MANIFEST).is_file() {
                bail!(
                    "{} exists and was not written by fstefan; refusing to overwrite",
                    dir.display()
                );
            }
            fs::remove_dir_all(dir)
                .with_context(|| format!("cannot clear previous output {}", dir.display()))?;
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Writes a single file through a sibling temporary so that a failed write
/// never leaves a truncated file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-fstefan");
    let result = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("cannot write {}", path.display()))
}
