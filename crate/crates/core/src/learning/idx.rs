//! IDX (MNIST) reader. Files may be raw or gzip-compressed.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use thiserror::Error;

use super::Dataset;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic number {found:#010x} at byte 0, expected {expected:#010x}")]
    BadMagic { found: u32, expected: u32 },
    #[error("truncated input: need {needed} bytes at byte offset {offset}, have {available}")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("trailing data: declared size ends at byte {declared_end}, file has {actual} bytes")]
    Trailing { declared_end: usize, actual: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {value} at byte offset {offset} exceeds 9")]
    BadLabel { offset: usize, value: u8 },
    #[error("dimensions overflow at byte offset {offset}")]
    Overflow { offset: usize },
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, IdxError> {
    let chunk = bytes.get(offset..offset + 4).ok_or(IdxError::Truncated {
        offset,
        needed: 4,
        available: bytes.len().saturating_sub(offset),
    })?;
    Ok(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
}

/// Header dimensions after checking magic; returns (dims, payload offset).
fn header(bytes: &[u8], magic: u32, ndims: usize) -> Result<(Vec<usize>, usize), IdxError> {
    let found = read_u32(bytes, 0)?;
    if found != magic {
        return Err(IdxError::BadMagic {
            found,
            expected: magic,
        });
    }
    let mut dims = Vec::with_capacity(ndims);
    for k in 0..ndims {
        dims.push(read_u32(bytes, 4 + 4 * k)? as usize);
    }
    Ok((dims, 4 + 4 * ndims))
}

fn payload(bytes: &[u8], offset: usize, size: usize) -> Result<&[u8], IdxError> {
    let end = offset.checked_add(size).ok_or(IdxError::Overflow { offset })?;
    if bytes.len() < end {
        return Err(IdxError::Truncated {
            offset,
            needed: size,
            available: bytes.len() - offset,
        });
    }
    if bytes.len() > end {
        return Err(IdxError::Trailing {
            declared_end: end,
            actual: bytes.len(),
        });
    }
    Ok(&bytes[offset..end])
}

/// Parses an IDX3 image file: returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8]), IdxError> {
    let (dims, off) = header(bytes, IDX_IMAGES_MAGIC, 3)?;
    let size = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .ok_or(IdxError::Overflow { offset: 4 })?;
    Ok((dims[0], dims[1], dims[2], payload(bytes, off, size)?))
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8], IdxError> {
    let (dims, off) = header(bytes, IDX_LABELS_MAGIC, 1)?;
    let labels = payload(bytes, off, dims[0])?;
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(IdxError::BadLabel {
            offset: off + pos,
            value: labels[pos],
        });
    }
    Ok(labels)
}

/// Reads a file, transparently inflating gzip input.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>, IdxError> {
    let io = |source| IdxError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut raw = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut raw)).map_err(io)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Loads an image/label file pair; pixels are scaled to `[0, 1]`.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<Dataset, IdxError> {
    let img_bytes = read_maybe_gzip(images_path)?;
    let lbl_bytes = read_maybe_gzip(labels_path)?;
    let (n, rows, cols, pixels) = parse_idx_images(&img_bytes)?;
    let labels = parse_idx_labels(&lbl_bytes)?;
    if labels.len() != n {
        return Err(IdxError::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let features = pixels.iter().map(|&p| f32::from(p) / 255.0).collect();
    Ok(Dataset::new(features, labels.to_vec(), rows * cols, 10)
        .expect("validated IDX content forms a dataset"))
}
