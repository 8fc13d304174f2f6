//! Run manifests: every artifact a command emits, listed with its
//! content hash so a re-run can prove byte-level reproducibility.
//!
//! The manifest itself is written last and never lists itself. The
//! timestamp is opt-in; without `--stamp` two runs over identical
//! inputs produce identical manifests.

use crate::error::CliError;
use gavel::extraction::sha256_hex;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One emitted artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output root, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance record for one command invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Hash of the resolved configuration as emitted, empty when the
    /// command takes no config.
    pub config_sha256: String,
    /// Hash of the primary input file bytes, empty when the command
    /// reads a directory instead.
    pub corpus_sha256: String,
    pub seed: u64,
    /// RFC 3339 wall-clock time, present only under `--stamp`.
    pub timestamp: Option<String>,
    /// Sorted by path.
    pub outputs: Vec<ManifestEntry>,
}

/// Collects outputs under one root directory and records their hashes.
pub struct OutputWriter {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputWriter {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutputWriter { root: root.to_path_buf(), entries: Vec::new() })
    }

    /// Writes one artifact and records it for the manifest.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        self.write_with_mode(rel, bytes, None)
    }

    /// Writes an owner-only artifact (mode 0o600). Sealed files hold
    /// ground truth that downstream steps must not read by accident.
    pub fn write_sealed(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        self.write_with_mode(rel, bytes, Some(0o600))
    }

    fn write_with_mode(&mut self, rel: &str, bytes: &[u8], mode: Option<u32>) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        #[cfg(unix)]
        if let Some(mode) = mode {
            use std::os::unix::fs::PermissionsExt;
            fs::set_permissions(&path, fs::Permissions::from_mode(mode))?;
        }
        #[cfg(not(unix))]
        let _ = mode;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Emits `manifest.json` listing everything written so far.
    pub fn finish(
        mut self,
        command: &str,
        config_sha256: String,
        corpus_sha256: String,
        seed: u64,
        stamp: bool,
    ) -> Result<RunManifest, CliError> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            tool: "gavel".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256,
            corpus_sha256,
            seed,
            timestamp: stamp.then(|| chrono::Utc::now().to_rfc3339()),
            outputs: self.entries,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(self.root.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn manifest_lists_outputs_sorted_with_hashes() {
        let dir = tempdir().unwrap();
        let mut w = OutputWriter::new(dir.path()).unwrap();
        w.write("b.txt", b"bb").unwrap();
        w.write("a/x.txt", b"aa").unwrap();
        let m = w.finish("test", String::new(), String::new(), 7, false).unwrap();
        assert_eq!(
            m.outputs.iter().map(|e| e.path.as_str()).collect::<Vec<_>>(),
            ["a/x.txt", "b.txt"]
        );
        assert_eq!(m.outputs[0].sha256, sha256_hex(b"aa"));
        assert_eq!(m.outputs[1].bytes, 2);
        assert!(m.timestamp.is_none());

        let reread: RunManifest = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap(),
        )
        .unwrap();
        assert_eq!(reread, m);
    }

    #[cfg(unix)]
    #[test]
    fn sealed_files_are_owner_only() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempdir().unwrap();
        let mut w = OutputWriter::new(dir.path()).unwrap();
        w.write_sealed("oracle.sealed.json", b"{}").unwrap();
        let mode = std::fs::metadata(dir.path().join("oracle.sealed.json"))
            .unwrap()
            .permissions()
            .mode();
        assert_eq!(mode & 0o777, 0o600);
    }
}
