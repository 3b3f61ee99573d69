use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WriteStatus {
    Created,
    Unchanged,
    /// The previous content was moved to the returned version path.
    Versioned,
}

/// First unused `<path>.vN`, N starting at 1.
pub fn next_version(path: &Path) -> PathBuf {
    (1..)
        .map(|n| {
            let mut s = path.as_os_str().to_owned();
            s.push(format!(".v{n}"));
            PathBuf::from(s)
        })
        .find(|p| !p.exists())
        .expect("unbounded version range")
}

/// Writes `bytes` to `path`. Identical existing content is left alone; different
/// content is first moved aside to the next free version suffix.
pub fn write_versioned(path: &Path, bytes: &[u8]) -> Result<WriteStatus, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let status = match std::fs::read(path) {
        Ok(old) if old == bytes => return Ok(WriteStatus::Unchanged),
        Ok(_) => {
            let v = next_version(path);
            std::fs::rename(path, &v).map_err(|e| io_err(path, e))?;
            WriteStatus::Versioned
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => WriteStatus::Created,
        Err(e) => return Err(io_err(path, e)),
    };
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    Ok(status)
}

/// Content hashes of one command's outputs, keyed by path relative to the output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub data_key: String,
    pub artifacts: BTreeMap<String, String>,
}

/// Collects outputs of one command under `root`.
pub struct ArtifactWriter {
    root: PathBuf,
    pub manifest: Manifest,
}

impl ArtifactWriter {
    pub fn new(
        root: &Path,
        command: &str,
        seed: u64,
        config_sha256: String,
        data_key: String,
    ) -> Self {
        Self {
            root: root.to_path_buf(),
            manifest: Manifest {
                command: command.to_string(),
                seed,
                config_sha256,
                data_key,
                artifacts: BTreeMap::new(),
            },
        }
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(rel);
        write_versioned(&path, bytes)?;
        self.manifest
            .artifacts
            .insert(rel.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let rel = manifest_name(&self.manifest.command);
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.root.join(rel);
        write_versioned(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn manifest_name(command: &str) -> String {
    format!("{command}.manifest.json")
}

pub fn read_manifest(root: &Path, command: &str) -> Result<Option<Manifest>, CliError> {
    let path = root.join(manifest_name(command));
    match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(&path, e)),
    }
}

/// Reads an artifact recorded in `manifest`, failing if its content no longer matches.
pub fn read_checked(root: &Path, manifest: &Manifest, rel: &str) -> Result<Vec<u8>, CliError> {
    let path = root.join(rel);
    let want = manifest.artifacts.get(rel).ok_or_else(|| {
        CliError::Runtime(format!(
            "{} does not list {rel}",
            manifest_name(&manifest.command)
        ))
    })?;
    let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
    if &sha256_hex(&bytes) != want {
        return Err(CliError::Runtime(format!(
            "{} changed since `{}` wrote it; rerun `{}`",
            path.display(),
            manifest.command,
            manifest.command
        )));
    }
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn versioning_keeps_old_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/t.csv");
        assert_eq!(write_versioned(&p, b"one").unwrap(), WriteStatus::Created);
        assert_eq!(write_versioned(&p, b"one").unwrap(), WriteStatus::Unchanged);
        assert_eq!(write_versioned(&p, b"two").unwrap(), WriteStatus::Versioned);
        assert_eq!(
            write_versioned(&p, b"three").unwrap(),
            WriteStatus::Versioned
        );
        assert_eq!(std::fs::read(&p).unwrap(), b"three");
        assert_eq!(
            std::fs::read(dir.path().join("a/t.csv.v1")).unwrap(),
            b"one"
        );
        assert_eq!(
            std::fs::read(dir.path().join("a/t.csv.v2")).unwrap(),
            b"two"
        );
    }

    #[test]
    fn checked_read_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::new(dir.path(), "prepare", 0, "c".into(), "k".into());
        w.write("x.txt", b"hello").unwrap();
        w.finish().unwrap();
        let m = read_manifest(dir.path(), "prepare").unwrap().unwrap();
        assert_eq!(read_checked(dir.path(), &m, "x.txt").unwrap(), b"hello");
        std::fs::write(dir.path().join("x.txt"), b"changed").unwrap();
        assert!(read_checked(dir.path(), &m, "x.txt").is_err());
        assert!(read_manifest(dir.path(), "pretrain").unwrap().is_none());
    }
}
