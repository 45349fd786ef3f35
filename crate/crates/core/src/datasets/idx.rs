//! Big-endian IDX files as used by MNIST. Gzipped files are detected by their
//! magic bytes and decompressed transparently.

use super::{DatasetError, LabeledDataset};
use crate::linalg::Matrix;
use flate2::read::GzDecoder;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_payload(path: &Path) -> Result<Vec<u8>, DatasetError> {
    let raw = fs::read(path).map_err(io_err(path))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(io_err(path))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn check_header(
    path: &Path,
    bytes: &[u8],
    header_len: usize,
    magic: u32,
) -> Result<(), DatasetError> {
    if bytes.len() < header_len {
        return Err(DatasetError::Truncated {
            path: path.to_path_buf(),
            got: bytes.len(),
            expected: header_len,
        });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(DatasetError::BadMagic {
            path: path.to_path_buf(),
            found,
            expected: magic,
        });
    }
    Ok(())
}

/// Reads an image file; returns pixels scaled to `[0, 1]` and `(rows, cols)`.
pub fn read_idx_images(path: &Path) -> Result<(Matrix, (usize, usize)), DatasetError> {
    let bytes = read_payload(path)?;
    check_header(path, &bytes, 16, IMAGE_MAGIC)?;
    let n = be_u32(&bytes, 4) as usize;
    let rows = be_u32(&bytes, 8) as usize;
    let cols = be_u32(&bytes, 12) as usize;
    let expected = 16 + n * rows * cols;
    if bytes.len() < expected {
        return Err(DatasetError::Truncated {
            path: path.to_path_buf(),
            got: bytes.len(),
            expected,
        });
    }
    let data = bytes[16..expected]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    let m = Matrix::from_vec(n, rows * cols, data).expect("length checked above");
    Ok((m, (rows, cols)))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<usize>, DatasetError> {
    let bytes = read_payload(path)?;
    check_header(path, &bytes, 8, LABEL_MAGIC)?;
    let n = be_u32(&bytes, 4) as usize;
    if bytes.len() < 8 + n {
        return Err(DatasetError::Truncated {
            path: path.to_path_buf(),
            got: bytes.len(),
            expected: 8 + n,
        });
    }
    Ok(bytes[8..8 + n].iter().map(|&b| b as usize).collect())
}

/// Loads an image file and, optionally, its label file.
pub fn load_idx(
    images_path: &Path,
    labels_path: Option<&Path>,
) -> Result<LabeledDataset, DatasetError> {
    let (samples, shape) = read_idx_images(images_path)?;
    let labels = labels_path.map(read_idx_labels).transpose()?;
    if let Some(l) = &labels {
        if l.len() != samples.rows() {
            return Err(DatasetError::CountMismatch {
                images: samples.rows(),
                labels: l.len(),
            });
        }
    }
    let n_classes = labels
        .as_ref()
        .map(|l| l.iter().copied().max().map_or(0, |m| m + 1));
    Ok(LabeledDataset {
        samples,
        labels,
        n_classes,
        image_shape: Some(shape),
    })
}

/// Writes pixels as `round(255 * v)` after clamping to `[0, 1]`.
pub fn write_idx_images(
    path: &Path,
    samples: &Matrix,
    shape: (usize, usize),
) -> Result<(), DatasetError> {
    assert_eq!(
        shape.0 * shape.1,
        samples.cols(),
        "image shape does not match feature count"
    );
    let mut out = Vec::with_capacity(16 + samples.as_slice().len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(samples.rows() as u32).to_be_bytes());
    out.extend_from_slice(&(shape.0 as u32).to_be_bytes());
    out.extend_from_slice(&(shape.1 as u32).to_be_bytes());
    out.extend(
        samples
            .as_slice()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    write_file(path, &out)
}

pub fn write_idx_labels(path: &Path, labels: &[usize]) -> Result<(), DatasetError> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend(
        labels
            .iter()
            .map(|&y| u8::try_from(y).expect("IDX labels are single bytes")),
    );
    write_file(path, &out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;

    fn image_bytes(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IMAGE_MAGIC, n, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    #[test]
    fn single_two_by_two_image() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img");
        fs::write(&p, image_bytes(1, 2, 2, &[0, 255, 128, 0])).unwrap();
        let ds = load_idx(&p, None).unwrap();
        assert_eq!(ds.samples.as_slice(), &[0.0, 1.0, 128.0 / 255.0, 0.0]);
        assert_eq!(ds.image_shape, Some((2, 2)));
        assert!(ds.labels.is_none());
    }

    #[test]
    fn gzip_is_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.gz");
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&image_bytes(1, 1, 3, &[1, 2, 3])).unwrap();
        fs::write(&p, enc.finish().unwrap()).unwrap();
        let (m, shape) = read_idx_images(&p).unwrap();
        assert_eq!(shape, (1, 3));
        assert_eq!(m.row(0)[2], 3.0 / 255.0);
    }

    #[test]
    fn label_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        fs::write(&img, image_bytes(2, 1, 1, &[0, 1])).unwrap();
        write_idx_labels(&lab, &[3, 4, 5]).unwrap();
        assert!(matches!(
            load_idx(&img, Some(&lab)),
            Err(DatasetError::CountMismatch {
                images: 2,
                labels: 3
            })
        ));
    }

    #[test]
    fn bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        let mut b = image_bytes(1, 2, 2, &[0, 0, 0, 0]);
        b[3] = 0x01;
        fs::write(&p, &b).unwrap();
        assert!(matches!(
            load_idx(&p, None),
            Err(DatasetError::BadMagic { .. })
        ));
        fs::write(&p, image_bytes(2, 2, 2, &[0, 0, 0])).unwrap();
        assert!(matches!(
            load_idx(&p, None),
            Err(DatasetError::Truncated { .. })
        ));
        fs::write(&p, [0u8; 5]).unwrap();
        assert!(matches!(
            load_idx(&p, None),
            Err(DatasetError::Truncated { .. })
        ));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_idx(Path::new("/nonexistent/train-images"), None).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/train-images"));
    }
}
