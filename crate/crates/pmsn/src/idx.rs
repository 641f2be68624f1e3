//! IDX image/label files (the MNIST distribution format).

use std::fs;
use std::path::Path;

use pmsn_core::train::ImageSet;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, path: &Path, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::parse(path, offset as u64, format!("file truncated while reading {what}")))
}

/// Raw image tensor of an IDX3 file: `(count, rows, cols, bytes)`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0, path, "magic number")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::parse(
            path,
            0,
            format!("bad magic 0x{magic:08X} for an image file"),
        ));
    }
    let n = be_u32(bytes, 4, path, "image count")? as usize;
    let rows = be_u32(bytes, 8, path, "row count")? as usize;
    let cols = be_u32(bytes, 12, path, "column count")? as usize;
    let need = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::parse(path, 4, "declared dimensions overflow"))?;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::parse(
            path,
            bytes.len() as u64,
            format!(
                "file truncated: header declares {need} pixel bytes, found {}",
                body.len()
            ),
        ));
    }
    if body.len() > need {
        return Err(Error::parse(
            path,
            (16 + need) as u64,
            "trailing bytes after the declared pixels",
        ));
    }
    Ok((n, rows, cols, body.to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, path, "magic number")?;
    if magic != LABEL_MAGIC {
        return Err(Error::parse(
            path,
            0,
            format!("bad magic 0x{magic:08X} for a label file"),
        ));
    }
    let n = be_u32(bytes, 4, path, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::parse(
            path,
            bytes.len() as u64,
            format!("file truncated: header declares {n} labels, found {}", body.len()),
        ));
    }
    if body.len() > n {
        return Err(Error::parse(
            path,
            (8 + n) as u64,
            "trailing bytes after the declared labels",
        ));
    }
    Ok(body.to_vec())
}

/// Loads an image file and its label file; pixels are scaled to `[0, 1]`.
pub fn load_idx(images: &Path, labels: &Path) -> Result<ImageSet> {
    let ib = fs::read(images).map_err(|e| Error::io(images, e))?;
    let lb = fs::read(labels).map_err(|e| Error::io(labels, e))?;
    let (n, rows, cols, px) = parse_idx_images(&ib, images)?;
    let lab = parse_idx_labels(&lb, labels)?;
    if lab.len() != n {
        return Err(Error::format(
            labels,
            format!("{} labels for {n} images in {}", lab.len(), images.display()),
        ));
    }
    let pixels = px.iter().map(|&b| b as f32 / 255.0).collect();
    Ok(ImageSet::new(rows, cols, 1, pixels, lab)?)
}

pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = pixels.len() / (rows * cols).max(1);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Writes an image set back to IDX; pixels are rounded to bytes.
pub fn write_idx(images: &Path, labels: &Path, set: &ImageSet) -> Result<()> {
    if set.channels != 1 {
        return Err(Error::Validation("IDX image files hold a single channel".into()));
    }
    let px: Vec<u8> = set
        .pixels
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    fs::write(images, encode_idx_images(set.rows, set.cols, &px)).map_err(|e| Error::io(images, e))?;
    fs::write(labels, encode_idx_labels(&set.labels)).map_err(|e| Error::io(labels, e))?;
    Ok(())
}
