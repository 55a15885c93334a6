//! MNIST IDX files: big-endian `u32` header followed by unsigned bytes.
//!
//! Images: magic `0x00000803`, count, rows, cols, then `count*rows*cols`
//! pixels. Labels: magic `0x00000801`, count, then `count` labels.

use std::fs;
use std::path::Path;

use crate::error::{Error, IdxError, Result};
use crate::matrix::Matrix;

use super::{LabeledDataset, NUM_CLASSES};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn parse_header(
    bytes: &[u8],
    path: &Path,
    magic: u32,
    dims: usize,
) -> Result<Vec<usize>, IdxError> {
    let header_len = 4 * (1 + dims);
    if bytes.len() < 4 {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected: header_len,
            found: bytes.len(),
        });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(IdxError::WrongMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    if bytes.len() < header_len {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected: header_len,
            found: bytes.len(),
        });
    }
    let sizes: Vec<usize> = (0..dims)
        .map(|i| be_u32(bytes, 4 + 4 * i) as usize)
        .collect();
    let expected = header_len + sizes.iter().product::<usize>();
    if bytes.len() < expected {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(sizes)
}

pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<IdxImages, IdxError> {
    let dims = parse_header(bytes, path, IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let start = 16;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[start..start + count * rows * cols].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>, IdxError> {
    let dims = parse_header(bytes, path, LABELS_MAGIC, 1)?;
    let labels = bytes[8..8 + dims[0]].to_vec();
    if let Some(&label) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
        return Err(IdxError::BadLabel {
            path: path.to_path_buf(),
            label,
        });
    }
    Ok(labels)
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_idx_images(&bytes, path)?)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_idx_labels(&bytes, path)?)
}

/// Loads an image/label file pair, scaling pixels to `[0, 1]` and one-hot
/// encoding labels.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.count != labels.len() {
        return Err(IdxError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        }
        .into());
    }
    let width = images.rows * images.cols;
    let data = images
        .pixels
        .iter()
        .map(|&p| f64::from(p) / 255.0)
        .collect();
    LabeledDataset::classification(Matrix::from_vec(images.count, width, data), labels)
}

pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let per = rows * cols;
    assert!(
        per > 0 && pixels.len().is_multiple_of(per),
        "pixel buffer is not a whole number of images"
    );
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [
        IMAGES_MAGIC,
        (pixels.len() / per) as u32,
        rows as u32,
        cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_errors() {
        let p = Path::new("f");
        let good = encode_idx_labels(&[1, 2, 3]);
        assert_eq!(parse_idx_labels(&good, p).unwrap(), vec![1, 2, 3]);
        assert!(matches!(
            parse_idx_images(&good, p),
            Err(IdxError::WrongMagic {
                found: LABELS_MAGIC,
                ..
            })
        ));
        assert!(matches!(
            parse_idx_labels(&good[..9], p),
            Err(IdxError::Truncated {
                expected: 11,
                found: 9,
                ..
            })
        ));
        assert!(matches!(
            parse_idx_labels(&good[..2], p),
            Err(IdxError::Truncated { .. })
        ));
        assert!(matches!(
            parse_idx_labels(&encode_idx_labels(&[12]), p),
            Err(IdxError::BadLabel { label: 12, .. })
        ));
    }

    #[test]
    fn pixel_scaling_endpoints() {
        let img = encode_idx_images(1, 2, &[255, 0]);
        let parsed = parse_idx_images(&img, Path::new("f")).unwrap();
        assert_eq!((parsed.count, parsed.rows, parsed.cols), (1, 1, 2));
        assert_eq!(parsed.pixels, vec![255, 0]);
    }
}
