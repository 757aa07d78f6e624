//! Work-directory layout, locking, stage markers and artifact I/O.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Synth,
    Preprocess,
    Train,
    Gridsearch,
    Benchmark,
    Detect,
    Explore,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Preprocess,
        Stage::Train,
        Stage::Gridsearch,
        Stage::Benchmark,
        Stage::Detect,
        Stage::Explore,
        Stage::Report,
    ];

    /// The stages a full run executes, in order. The grid search is opt-in.
    pub const PIPELINE: [Stage; 7] = [
        Stage::Synth,
        Stage::Preprocess,
        Stage::Train,
        Stage::Benchmark,
        Stage::Detect,
        Stage::Explore,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Preprocess => "preprocess",
            Stage::Train => "train",
            Stage::Gridsearch => "gridsearch",
            Stage::Benchmark => "benchmark",
            Stage::Detect => "detect",
            Stage::Explore => "explore",
            Stage::Report => "report",
        }
    }

    /// Upstream stages whose artifacts this one reads.
    pub fn needs(self) -> &'static [Stage] {
        match self {
            Stage::Synth => &[],
            Stage::Preprocess => &[Stage::Synth],
            Stage::Train | Stage::Gridsearch => &[Stage::Preprocess],
            Stage::Benchmark => &[Stage::Synth, Stage::Preprocess],
            Stage::Detect => &[Stage::Preprocess, Stage::Train, Stage::Benchmark],
            Stage::Explore => &[Stage::Train, Stage::Detect],
            Stage::Report => &[Stage::Detect],
        }
    }
}

pub const MARKER: &str = "stage.json";
pub const LOCK: &str = ".lock";

#[derive(Debug, Serialize, Deserialize)]
struct Marker {
    stage: Stage,
    config_sha256: String,
}

#[derive(Debug, Clone)]
pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workdir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.name())
    }

    /// Takes the exclusive lock; released when the guard drops.
    pub fn lock(&self) -> Result<LockGuard> {
        fs::create_dir_all(&self.root).map_err(|e| CliError::io(&self.root, e))?;
        let path = self.root.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(self.root.clone())),
            Err(e) => Err(CliError::io(path, e)),
        }
    }

    pub fn is_complete(&self, stage: Stage) -> bool {
        self.stage_dir(stage).join(MARKER).is_file()
    }

    pub fn require(&self, stage: Stage) -> Result<()> {
        for &up in stage.needs() {
            if !self.is_complete(up) {
                return Err(CliError::MissingStage {
                    stage: stage.name(),
                    needs: up.name(),
                    marker: self.stage_dir(up).join(MARKER),
                });
            }
        }
        Ok(())
    }

    /// Empties and recreates the stage directory.
    pub fn begin(&self, stage: Stage) -> Result<PathBuf> {
        let dir = self.stage_dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }

    /// Written last, so an interrupted stage never looks complete.
    pub fn finish(&self, stage: Stage, config_sha256: &str) -> Result<()> {
        let marker = Marker { stage, config_sha256: config_sha256.to_string() };
        write_json(&self.stage_dir(stage).join(MARKER), &marker)
    }
}

pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(foldscan_core::Error::from)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(foldscan_core::Error::from)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Every regular file under `dir`, as sorted paths relative to `dir`.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| CliError::io(dir, e))?;
            let path = entry.path();
            let ty = entry.file_type().map_err(|e| CliError::io(&path, e))?;
            if ty.is_dir() {
                walk(base, &path, out)?;
            } else if ty.is_file() {
                out.push(path.strip_prefix(base).expect("walk stays under base").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let tmp = tempfile::tempdir().unwrap();
        let wd = Workdir::new(tmp.path());
        let guard = wd.lock().unwrap();
        assert!(matches!(wd.lock(), Err(CliError::Locked(_))));
        drop(guard);
        wd.lock().unwrap();
    }

    #[test]
    fn missing_upstream_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        let wd = Workdir::new(tmp.path());
        let err = wd.require(Stage::Detect).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("preprocess"));
        wd.begin(Stage::Synth).unwrap();
        wd.finish(Stage::Synth, "x").unwrap();
        wd.require(Stage::Preprocess).unwrap();
    }

    #[test]
    fn file_listing_is_sorted_and_relative() {
        let tmp = tempfile::tempdir().unwrap();
        create_dir(&tmp.path().join("b/c")).unwrap();
        write_text(&tmp.path().join("b/c/z.txt"), "1").unwrap();
        write_text(&tmp.path().join("a.txt"), "2").unwrap();
        let files = list_files(tmp.path()).unwrap();
        assert_eq!(files, vec![PathBuf::from("a.txt"), PathBuf::from("b/c/z.txt")]);
        assert_eq!(
            sha256_file(&tmp.path().join("a.txt")).unwrap(),
            sha256_hex(b"2")
        );
    }
}
