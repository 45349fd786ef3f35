//! JSON manifest mapping dataset names to local IDX files and checksums.
//! Nothing is ever downloaded; relative paths resolve against
//! `$CRITREP_DATA_DIR` when set, otherwise against the manifest's directory.

use super::{load_idx, DatasetError, LabeledDataset};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const DATA_DIR_ENV: &str = "CRITREP_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub images: String,
    #[serde(default)]
    pub labels: Option<String>,
    /// Checksum of the images file as stored on disk.
    #[serde(default)]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_sha256: Option<String>,
    /// Number of images in the file, before any filtering.
    #[serde(default)]
    pub n_expected: Option<usize>,
    /// Keep only labels in `[lo, hi)`, relabelled from zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_range: Option<[usize; 2]>,
    /// Row range `[start, end)` applied after label filtering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: BTreeMap<String, ManifestEntry>,
    base_dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let entries = serde_json::from_str(&text).map_err(|e| DatasetError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Manifest { entries, base_dir })
    }

    pub fn from_entries(entries: BTreeMap<String, ManifestEntry>, base_dir: PathBuf) -> Self {
        Manifest { entries, base_dir }
    }

    pub fn resolve(&self, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            return p.to_path_buf();
        }
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(p),
            _ => self.base_dir.join(p),
        }
    }

    pub fn entry(&self, name: &str) -> Result<&ManifestEntry, DatasetError> {
        self.entries
            .get(name)
            .ok_or_else(|| DatasetError::UnknownDataset(name.to_string()))
    }

    /// Resolved paths of the files backing `name`.
    pub fn files(&self, name: &str) -> Result<(PathBuf, Option<PathBuf>), DatasetError> {
        let e = self.entry(name)?;
        Ok((
            self.resolve(&e.images),
            e.labels.as_deref().map(|l| self.resolve(l)),
        ))
    }

    pub fn load_dataset(&self, name: &str) -> Result<LabeledDataset, DatasetError> {
        let entry = self.entry(name)?;
        let (images, labels) = self.files(name)?;
        verify_checksum(&images, entry.sha256.as_deref())?;
        if let Some(l) = &labels {
            verify_checksum(l, entry.labels_sha256.as_deref())?;
        }
        let mut ds = load_idx(&images, labels.as_deref())?;
        if let Some(n) = entry.n_expected {
            if n != ds.len() {
                return Err(DatasetError::Manifest {
                    path: images,
                    message: format!("expected {n} images, found {}", ds.len()),
                });
            }
        }
        if let Some([lo, hi]) = entry.label_range {
            ds = ds.filter_label_range(lo, hi);
        }
        if let Some([start, end]) = entry.subset {
            ds = ds.subset(start, end);
        }
        Ok(ds)
    }
}

fn verify_checksum(path: &Path, expected: Option<&str>) -> Result<(), DatasetError> {
    let Some(expected) = expected else {
        return Ok(());
    };
    let bytes = fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let found = sha256_hex(&bytes);
    if !found.eq_ignore_ascii_case(expected) {
        return Err(DatasetError::Checksum {
            path: path.to_path_buf(),
            found,
            expected: expected.to_string(),
        });
    }
    Ok(())
}
