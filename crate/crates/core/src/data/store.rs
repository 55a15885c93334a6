//! Flat binary container for generated datasets.
//!
//! ```text
//! "RSGD-DS"   7 bytes magic
//! version     u8
//! n_in        u32 LE
//! n_out       u32 LE
//! count       u64 LE
//! count rows of (n_in inputs, n_out targets) as f64 LE
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::LabeledDataset;

pub const DATASET_MAGIC: &[u8; 7] = b"RSGD-DS";
const DATASET_VERSION: u8 = 1;
const HEADER_LEN: usize = 7 + 1 + 4 + 4 + 8;

/// Serializes inputs and targets; class labels are not stored.
pub fn encode_dataset(d: &LabeledDataset) -> Vec<u8> {
    let (n_in, n_out) = (d.input_width(), d.target_width());
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * d.len() * (n_in + n_out));
    out.extend_from_slice(DATASET_MAGIC);
    out.push(DATASET_VERSION);
    out.extend_from_slice(&(n_in as u32).to_le_bytes());
    out.extend_from_slice(&(n_out as u32).to_le_bytes());
    out.extend_from_slice(&(d.len() as u64).to_le_bytes());
    for r in 0..d.len() {
        for v in d.inputs().row(r).iter().chain(d.targets().row(r)) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_dataset(bytes: &[u8], path: &Path) -> Result<LabeledDataset> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN || &bytes[..7] != DATASET_MAGIC {
        return Err(bad("not a dataset file (bad magic or short header)".into()));
    }
    if bytes[7] != DATASET_VERSION {
        return Err(bad(format!("unsupported dataset version {}", bytes[7])));
    }
    let n_in = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n_out = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let row = n_in + n_out;
    let expected = count
        .checked_mul(row)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| bad("header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut inputs = Vec::with_capacity(count * n_in);
    let mut targets = Vec::with_capacity(count * n_out);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if i % row < n_in {
            inputs.push(v);
        } else {
            targets.push(v);
        }
    }
    LabeledDataset::regression(
        Matrix::from_vec(count, n_in, inputs),
        Matrix::from_vec(count, n_out, targets),
    )
}

pub fn write_dataset(d: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_dataset(d)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_teacher_dataset;
    use crate::rng::{RngStream, StreamId};

    #[test]
    fn round_trip() {
        let (train, _) =
            generate_teacher_dataset(6, 2, 20, &mut RngStream::new(1, StreamId::DataGen)).unwrap();
        let bytes = encode_dataset(&train);
        assert_eq!(&bytes[..7], b"RSGD-DS");
        let back = decode_dataset(&bytes, Path::new("m")).unwrap();
        assert_eq!(back, train);
        assert!(decode_dataset(&bytes[..bytes.len() - 8], Path::new("m")).is_err());
    }
}
