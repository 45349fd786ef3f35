//! Output directory bookkeeping and the run manifest written by every
//! subcommand.

use super::CliError;
use crate::datasets::sha256_hex;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Inputs, seeds, versions and output hashes of one subcommand run. Paths of
/// outputs are relative to the output directory so two runs into different
/// directories produce the same manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

pub struct OutputDir {
    root: PathBuf,
    outputs: Vec<FileRecord>,
    inputs: Vec<FileRecord>,
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            outputs: Vec::new(),
            inputs: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Writes `bytes` to `rel` (creating parent directories) and records it.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        self.record(rel, bytes);
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value).expect("output serializes") + "\n";
        self.write(rel, text.as_bytes())
    }

    /// Records a file some other writer already placed under the root.
    pub fn track(&mut self, rel: &str) -> Result<(), CliError> {
        let path = self.root.join(rel);
        let bytes = fs::read(&path).map_err(|e| io_error(&path, e))?;
        self.record(rel, &bytes);
        Ok(())
    }

    /// Records an input file by hash; missing inputs are skipped.
    pub fn input(&mut self, path: &Path) {
        if let Ok(bytes) = fs::read(path) {
            self.inputs.push(FileRecord {
                path: path.display().to_string(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            });
        }
    }

    fn record(&mut self, rel: &str, bytes: &[u8]) {
        self.outputs.retain(|r| r.path != rel);
        self.outputs.push(FileRecord {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }

    pub fn finish(
        mut self,
        command: &'static str,
        threads: Option<usize>,
        seed: Option<u64>,
        parameters: serde_json::Value,
    ) -> Result<RunManifest, CliError> {
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            threads,
            seed,
            parameters,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let path = self.root.join(RUN_MANIFEST);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_sorted_outputs_with_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("run")).unwrap();
        out.write("b/x.txt", b"abc").unwrap();
        out.write("a.txt", b"").unwrap();
        out.write("a.txt", b"abc").unwrap();
        let m = out
            .finish("test", Some(1), Some(7), serde_json::json!({}))
            .unwrap();
        let paths: Vec<_> = m.outputs.iter().map(|r| r.path.as_str()).collect();
        assert_eq!(paths, ["a.txt", "b/x.txt"]);
        assert_eq!(
            m.outputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert!(dir.path().join("run").join(RUN_MANIFEST).exists());
    }
}
