//! Image datasets in IDX format, Ising equilibrium patterns, and the dataset
//! manifest.

mod idx;
mod ising;
mod manifest;

pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels};
pub use ising::{
    bond_sum, generate_ising_dataset, generate_ising_dataset_chains, ising_energy, magnetization,
    metropolis_sweep, Boundary, IsingLattice, IsingParams, IsingPreset, SweepStats,
};
pub use manifest::{sha256_hex, Manifest, ManifestEntry, DATA_DIR_ENV};

use crate::linalg::Matrix;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad IDX magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated payload ({got} bytes, expected {expected})")]
    Truncated {
        path: PathBuf,
        got: usize,
        expected: usize,
    },
    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: sha256 {found} does not match manifest {expected}")]
    Checksum {
        path: PathBuf,
        found: String,
        expected: String,
    },
    #[error("dataset {0:?} not in manifest")]
    UnknownDataset(String),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("invalid Ising parameters: {0}")]
    InvalidIsing(String),
}

/// Samples with pixels in `[0, 1]` and optional integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Matrix,
    pub labels: Option<Vec<usize>>,
    pub n_classes: Option<usize>,
    /// `(rows, cols)` of each image when the features come from a 2-D grid.
    pub image_shape: Option<(usize, usize)>,
}

impl LabeledDataset {
    pub fn unlabeled(samples: Matrix) -> Self {
        LabeledDataset {
            samples,
            labels: None,
            n_classes: None,
            image_shape: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.samples.cols()
    }

    /// Rows `start..end` as a new dataset.
    pub fn subset(&self, start: usize, end: usize) -> LabeledDataset {
        let end = end.min(self.len());
        let start = start.min(end);
        LabeledDataset {
            samples: self.samples.slice_rows(start, end),
            labels: self.labels.as_ref().map(|l| l[start..end].to_vec()),
            n_classes: self.n_classes,
            image_shape: self.image_shape,
        }
    }

    /// Keeps samples whose label lies in `lo..hi`, relabelled to `0..hi-lo`.
    /// Unlabelled datasets are returned unchanged.
    pub fn filter_label_range(&self, lo: usize, hi: usize) -> LabeledDataset {
        let Some(labels) = &self.labels else {
            return self.clone();
        };
        let keep: Vec<usize> = (0..labels.len())
            .filter(|&i| (lo..hi).contains(&labels[i]))
            .collect();
        LabeledDataset {
            samples: self.samples.select_rows(&keep),
            labels: Some(keep.iter().map(|&i| labels[i] - lo).collect()),
            n_classes: Some(hi - lo),
            image_shape: self.image_shape,
        }
    }

    /// One-hot encoding of the labels, if present.
    pub fn one_hot(&self) -> Option<Matrix> {
        let labels = self.labels.as_ref()?;
        let k = self.n_classes?;
        let mut m = Matrix::zeros(labels.len(), k);
        for (i, &y) in labels.iter().enumerate() {
            m.set(i, y, 1.0);
        }
        Some(m)
    }
}
