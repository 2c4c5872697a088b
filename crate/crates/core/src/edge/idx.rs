//! Big-endian IDX files (the MNIST distribution format).

use std::fs;
use std::path::Path;

use super::DatasetShard;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const N_CLASSES: usize = 10;

fn read(path: &Path) -> Result<Vec<u8>> {
    if path.as_os_str().is_empty() {
        return Err(Error::Idx {
            path: path.to_path_buf(),
            reason: "empty path".into(),
        });
    }
    fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx {
            path: path.to_path_buf(),
            reason: "truncated header".into(),
        })
}

/// Loads an image/label IDX pair; pixels are scaled to `[0, 1]`.
pub fn load_idx_dataset(images_path: &Path, labels_path: &Path) -> Result<DatasetShard> {
    let img = read(images_path)?;
    let lab = read(labels_path)?;
    let bad = |path: &Path, reason: String| Error::Idx {
        path: path.to_path_buf(),
        reason,
    };

    let magic = be_u32(&img, 0, images_path)?;
    if magic != IMAGES_MAGIC {
        return Err(bad(images_path, format!("bad magic {magic:#010x}")));
    }
    let count = be_u32(&img, 4, images_path)? as usize;
    let rows = be_u32(&img, 8, images_path)? as usize;
    let cols = be_u32(&img, 12, images_path)? as usize;
    let dim = rows * cols;
    let body = &img[16..];
    if body.len() != count * dim {
        return Err(bad(
            images_path,
            format!("expected {} pixel bytes, found {}", count * dim, body.len()),
        ));
    }

    let magic = be_u32(&lab, 0, labels_path)?;
    if magic != LABELS_MAGIC {
        return Err(bad(labels_path, format!("bad magic {magic:#010x}")));
    }
    let n_labels = be_u32(&lab, 4, labels_path)? as usize;
    let lbody = &lab[8..];
    if lbody.len() != n_labels {
        return Err(bad(
            labels_path,
            format!("expected {n_labels} label bytes, found {}", lbody.len()),
        ));
    }
    if n_labels != count {
        return Err(bad(
            labels_path,
            format!("{n_labels} labels for {count} images"),
        ));
    }

    let features = body.iter().map(|&p| p as f64 / 255.0).collect();
    let labels = lbody.iter().map(|&l| l as usize).collect();
    DatasetShard::new(features, labels, dim, N_CLASSES)
}

/// Writes an IDX image file from raw bytes (row-major `count × rows × cols`).
pub fn write_idx_images(path: &Path, rows: u32, cols: u32, pixels: &[u8]) -> Result<()> {
    let per = (rows * cols) as usize;
    if per == 0 || !pixels.len().is_multiple_of(per) {
        return Err(Error::invalid("pixel buffer is not a whole number of images"));
    }
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&((pixels.len() / per) as u32).to_be_bytes());
    out.extend_from_slice(&rows.to_be_bytes());
    out.extend_from_slice(&cols.to_be_bytes());
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
